//! W1 distance between k-point marginals of two empirical measures.
//!
//! The spatial integral over `D^k` is sampled with `Q` uniformly drawn
//! k-tuples of cells; for each tuple the two M-point clouds in `R^{2k}` are
//! matched exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{GridSpec, VectorField};
use crate::rng::SeededRng;

use super::assignment::assignment_cost;
use super::common_grid;

pub const MAX_MARGINAL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassersteinEstimate {
    pub k: usize,
    pub t: f64,
    pub num_tuples: usize,
    pub value: f64,
    pub tuple_seed: u64,
}

/// `q` k-tuples of flat cell indices drawn uniformly with replacement.
pub fn draw_tuples(grid: GridSpec, k: usize, q: usize, tuple_seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > MAX_MARGINAL {
        return Err(Error::InvalidParameter(format!(
            "marginal order k = {k} is unsupported (1..={MAX_MARGINAL})"
        )));
    }
    if q == 0 {
        return Err(Error::InvalidParameter("tuple count must be at least 1".into()));
    }
    let mut rng = SeededRng::new(tuple_seed, 0);
    let cells = grid.len() as u64;
    Ok((0..q)
        .map(|_| (0..k).map(|_| rng.below(cells) as usize).collect())
        .collect())
}

fn cloud(fields: &[VectorField], tuple: &[usize]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(fields.len() * 2 * tuple.len());
    for f in fields {
        for &c in tuple {
            pts.extend_from_slice(&f.at(c));
        }
    }
    pts
}

fn tuple_distance(a: &[VectorField], b: &[VectorField], tuple: &[usize]) -> Result<f64> {
    let m = a.len();
    let d = 2 * tuple.len();
    let (pa, pb) = (cloud(a, tuple), cloud(b, tuple));
    let mut cost = vec![0.0; m * m];
    for i in 0..m {
        let x = &pa[i * d..(i + 1) * d];
        for j in 0..m {
            let y = &pb[j * d..(j + 1) * d];
            cost[i * m + j] = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        }
    }
    Ok(assignment_cost(&cost, m)? / m as f64)
}

/// Average exact W1 over the given tuples.
pub fn wasserstein_on_tuples(a: &[VectorField], b: &[VectorField], tuples: &[Vec<usize>]) -> Result<f64> {
    let grid = common_grid(a)?;
    grid.require_same(&common_grid(b)?)?;
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "ensembles have {} and {} samples; subsample the larger one to the smaller size",
            a.len(),
            b.len()
        )));
    }
    if tuples.is_empty() {
        return Err(Error::InvalidParameter("no tuples".into()));
    }
    if let Some(&c) = tuples.iter().flatten().find(|&&c| c >= grid.len()) {
        return Err(Error::InvalidParameter(format!("cell index {c} outside a {grid} grid")));
    }
    let per_tuple: Vec<f64> = tuples
        .par_iter()
        .map(|t| tuple_distance(a, b, t))
        .collect::<Result<_>>()?;
    Ok(per_tuple.iter().sum::<f64>() / tuples.len() as f64)
}

pub fn wasserstein_marginal(
    a: &[VectorField],
    b: &[VectorField],
    k: usize,
    num_tuples: usize,
    tuple_seed: u64,
    t: f64,
) -> Result<WassersteinEstimate> {
    let grid = common_grid(a)?;
    let tuples = draw_tuples(grid, k, num_tuples, tuple_seed)?;
    let value = wasserstein_on_tuples(a, b, &tuples)?;
    Ok(WassersteinEstimate {
        k,
        t,
        num_tuples,
        value,
        tuple_seed,
    })
}
