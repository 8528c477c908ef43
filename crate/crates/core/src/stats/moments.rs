use crate::error::Result;
use crate::mesh::{ScalarField, VectorField};

use super::common_grid;

/// Cellwise sample mean and population (1/M) variance, per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: VectorField,
    pub variance: VectorField,
}

pub fn moments(fields: &[VectorField]) -> Result<Moments> {
    let grid = common_grid(fields)?;
    let m = fields.len() as f64;
    let first = &fields[0];
    // Accumulate deviations from the first sample so an ensemble of
    // identical fields gives that field and an exactly zero variance.
    let reduce = |pick: fn(&VectorField) -> &ScalarField| {
        let base = pick(first).values();
        let mut s1 = vec![0.0; grid.len()];
        let mut s2 = vec![0.0; grid.len()];
        for f in &fields[1..] {
            for ((x, b), (a1, a2)) in pick(f).values().iter().zip(base).zip(s1.iter_mut().zip(s2.iter_mut())) {
                let d = x - b;
                *a1 += d;
                *a2 += d * d;
            }
        }
        let mut mean = Vec::with_capacity(grid.len());
        let mut var = Vec::with_capacity(grid.len());
        for ((b, a1), a2) in base.iter().zip(&s1).zip(&s2) {
            let d = a1 / m;
            mean.push(b + d);
            var.push((a2 / m - d * d).max(0.0));
        }
        (ScalarField::from_raw(grid, mean), ScalarField::from_raw(grid, var))
    };
    let (mu, vu) = reduce(VectorField::u);
    let (mv, vv) = reduce(VectorField::v);
    Ok(Moments {
        mean: VectorField::from_parts(mu, mv),
        variance: VectorField::from_parts(vu, vv),
    })
}
