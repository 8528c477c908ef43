//! Fixed-time structure functions.
//!
//! For radius `l` (in cells) the ball integral is approximated by summing
//! `|U_{i+(k,n)} - U_i|^p` over offsets with weight 1 for
//! `k, n in [-l+1, l]`, an extra 1/2 for the rows `n = +-l` and columns
//! `k = +-l` restricted to `[-l+1, l]`, and 1/4 for the four corners, all
//! scaled by `h^2 / l^2`. The ensemble average is then raised to `1/p`.
//!
//! The per-sample sums are computed once per offset over the whole
//! `[-l_max, l_max]^2` window and re-weighted for every radius.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{GridSpec, VectorField};

use super::common_grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// Inclusive radius range (cell units) used by the fit.
    pub l_lo: usize,
    pub l_hi: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFunctionCurve {
    pub p: f64,
    pub t: f64,
    /// Radii `l = 1..=l_max` in cell units.
    pub radii: Vec<usize>,
    /// Physical radii `r = l h`.
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

/// Default radius bound: `n/8`, at least 4, below `n/2`.
pub fn default_l_max(grid: GridSpec) -> usize {
    let n = grid.n1().min(grid.n2());
    (n / 8).max(4).min(n / 2 - 1).max(1)
}

/// Central half of the radii: drop `l = 1` and the largest quarter, but
/// keep at least three points when `l_max >= 3`.
pub fn default_fit_range(l_max: usize) -> (usize, usize) {
    let lo = if l_max >= 4 { 2 } else { 1 };
    (lo, (l_max - l_max / 4).max(lo + 2).min(l_max))
}

fn in_inner(x: isize, l: isize) -> bool {
    x > -l && x <= l
}

/// Weight of offset `(k, n)` in the radius-`l` stencil.
pub fn structure_weight(l: usize, k: isize, n: isize) -> f64 {
    let l = l as isize;
    let mut w = 0.0;
    if in_inner(k, l) && in_inner(n, l) {
        w += 1.0;
    }
    if in_inner(k, l) && n.abs() == l {
        w += 0.5;
    }
    if in_inner(n, l) && k.abs() == l {
        w += 0.5;
    }
    if k.abs() == l && n.abs() == l {
        w += 0.25;
    }
    w
}

#[inline]
fn pow_p(sq: f64, p: f64) -> f64 {
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.powf(0.5 * p)
    }
}

/// `sum_i |U_{i+(k,n)} - U_i|^p` for every offset in `[-l_max, l_max]^2`,
/// stored at `(k + l_max) * (2 l_max + 1) + (n + l_max)`.
fn offset_sums(field: &VectorField, p: f64, l_max: usize) -> Vec<f64> {
    let g = field.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let (u, v) = (field.u().values(), field.v().values());
    let l = l_max as isize;
    let width = 2 * l_max + 1;
    let mut out = vec![0.0; width * width];
    for k in -l..=l {
        for n in -l..=l {
            let s2 = n.rem_euclid(n2 as isize) as usize;
            let mut acc = 0.0;
            for i1 in 0..n1 {
                let j1 = (i1 as isize + k).rem_euclid(n1 as isize) as usize;
                let (r, rj) = (i1 * n2, j1 * n2);
                // Split the row at the wrap point to keep the inner loops branch-free.
                let split = n2 - s2;
                for i2 in 0..split {
                    let (du, dv) = (u[rj + i2 + s2] - u[r + i2], v[rj + i2 + s2] - v[r + i2]);
                    acc += pow_p(du * du + dv * dv, p);
                }
                for i2 in split..n2 {
                    let (du, dv) = (u[rj + i2 + s2 - n2] - u[r + i2], v[rj + i2 + s2 - n2] - v[r + i2]);
                    acc += pow_p(du * du + dv * dv, p);
                }
            }
            out[(k + l) as usize * width + (n + l) as usize] = acc;
        }
    }
    out
}

pub fn structure_function(fields: &[VectorField], p: f64, l_max: usize, t: f64) -> Result<StructureFunctionCurve> {
    let grid = common_grid(fields)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("structure exponent p = {p} must be >= 1")));
    }
    let limit = grid.n1().min(grid.n2()) / 2;
    if l_max == 0 || l_max >= limit {
        return Err(Error::InvalidParameter(format!(
            "l_max = {l_max} must lie in [1, {limit}) on a {grid} grid"
        )));
    }
    let per_sample: Vec<Vec<f64>> = fields.par_iter().map(|f| offset_sums(f, p, l_max)).collect();
    let width = 2 * l_max + 1;
    let mut total = vec![0.0; width * width];
    for sums in &per_sample {
        for (t, s) in total.iter_mut().zip(sums) {
            *t += s;
        }
    }
    let m = fields.len() as f64;
    let area = grid.cell_area();
    let lm = l_max as isize;
    let mut values = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let li = l as isize;
        let mut acc = 0.0;
        for k in -li..=li {
            for n in -li..=li {
                let w = structure_weight(l, k, n);
                if w != 0.0 {
                    acc += w * total[(k + lm) as usize * width + (n + lm) as usize];
                }
            }
        }
        let mean = acc * area / (l * l) as f64 / m;
        values.push(mean.max(0.0).powf(1.0 / p));
    }
    let h = grid.h();
    Ok(StructureFunctionCurve {
        p,
        t,
        radii: (1..=l_max).collect(),
        r: (1..=l_max).map(|l| l as f64 * h).collect(),
        values,
    })
}

/// Least-squares slope of `log S` against `log r` over the inclusive radius
/// range `fit` (default: [`default_fit_range`]).
pub fn fit_slope(curve: &StructureFunctionCurve, fit: Option<(usize, usize)>) -> Result<SlopeFit> {
    let l_max = curve.radii.last().copied().unwrap_or(0);
    let (lo, hi) = match fit {
        Some(r) => r,
        None => default_fit_range(l_max),
    };
    let pts: Vec<(f64, f64)> = curve
        .radii
        .iter()
        .zip(curve.r.iter().zip(&curve.values))
        .filter(|(l, _)| (lo..=hi).contains(*l))
        .map(|(_, (&r, &s))| (r, s))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "slope fit over l in [{lo}, {hi}] has {} points, need 3",
            pts.len()
        )));
    }
    if let Some((r, s)) = pts.iter().find(|(_, s)| !(*s > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "structure function value {s} at r = {r} is not positive"
        )));
    }
    let n = pts.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|(r, s)| (r.ln(), s.ln())).unzip();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Ok(SlopeFit {
        slope: sxy / sxx,
        l_lo: lo,
        l_hi: hi,
    })
}
