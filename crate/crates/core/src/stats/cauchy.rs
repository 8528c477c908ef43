//! Differences between consecutive resolutions.

use crate::error::{Error, Result};
use crate::mesh::{l2_norm, restrict, VectorField};
use crate::rng::SeededRng;

use super::common_grid;
use super::moments::Moments;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRates {
    pub mean: f64,
    pub variance: f64,
}

/// `||restrict(fine, 2) - coarse||` for a fine grid exactly twice as fine.
pub fn cauchy_rate_field(fine: &VectorField, coarse: &VectorField) -> Result<f64> {
    let (gf, gc) = (fine.grid(), coarse.grid());
    if gf.n1() != 2 * gc.n1() || gf.n2() != 2 * gc.n2() {
        return Err(Error::GridMismatch {
            left: gf.to_string(),
            right: format!("2 x {gc}"),
        });
    }
    Ok(l2_norm(&restrict(fine, 2)?.sub(coarse)))
}

pub fn cauchy_rate_moments(fine: &Moments, coarse: &Moments) -> Result<MomentRates> {
    Ok(MomentRates {
        mean: cauchy_rate_field(&fine.mean, &coarse.mean)?,
        variance: cauchy_rate_field(&fine.variance, &coarse.variance)?,
    })
}

/// Root mean square over samples of the per-sample rate, pairing samples by index.
pub fn ensemble_field_rate(fine: &[VectorField], coarse: &[VectorField]) -> Result<f64> {
    common_grid(fine)?;
    common_grid(coarse)?;
    if fine.len() != coarse.len() {
        return Err(Error::InvalidParameter(format!(
            "ensembles have {} and {} samples",
            fine.len(),
            coarse.len()
        )));
    }
    let mut acc = 0.0;
    for (f, c) in fine.iter().zip(coarse) {
        let r = cauchy_rate_field(f, c)?;
        acc += r * r;
    }
    Ok((acc / fine.len() as f64).sqrt())
}

pub fn restrict_ensemble(fields: &[VectorField], factor: usize) -> Result<Vec<VectorField>> {
    fields.iter().map(|f| restrict(f, factor)).collect()
}

/// Seeded choice of `m` samples without replacement, kept in sample order.
pub fn subsample(fields: &[VectorField], m: usize, seed: u64) -> Result<Vec<VectorField>> {
    if m == 0 || m > fields.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot subsample {m} of {} samples",
            fields.len()
        )));
    }
    let mut idx: Vec<usize> = (0..fields.len()).collect();
    let mut rng = SeededRng::new(seed, 0);
    for i in 0..m {
        let j = i + rng.below((idx.len() - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut keep = idx[..m].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| fields[i].clone()).collect())
}
