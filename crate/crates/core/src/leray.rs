//! Discrete Leray projection onto fields with `div_h w = 0`.
//!
//! The stride-2 Laplacian is diagonal in the discrete Fourier basis with
//! symbol `-sin^2(2 pi k1 / n1) / dx^2 - sin^2(2 pi k2 / n2) / dy^2`. It
//! vanishes exactly on the four modes with `k1 in {0, n1/2}` and
//! `k2 in {0, n2/2}`; `div_h` vanishes on the same modes, so dropping them
//! leaves the projection unchanged. The returned potential is the
//! minimal-norm solution (zero on those modes).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::mesh::{cell_average_vector, div_h, grad_h, GridSpec, ScalarField, VectorField};

/// Quadrature order used for initial-data cell averages.
pub const DEFAULT_QUADRATURE: usize = 3;

pub struct PoissonSolver {
    grid: GridSpec,
    symbol: Vec<f64>,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver").field("grid", &self.grid).finish()
    }
}

fn axis_symbol(k: usize, n: usize, d: f64) -> f64 {
    if k == 0 || 2 * k == n {
        0.0
    } else {
        let s = (2.0 * std::f64::consts::PI * k as f64 / n as f64).sin();
        s * s / (d * d)
    }
}

impl PoissonSolver {
    pub fn new(grid: GridSpec) -> Result<Self> {
        grid.require_min(4)?;
        let (n1, n2) = (grid.n1(), grid.n2());
        let s1: Vec<f64> = (0..n1).map(|k| axis_symbol(k, n1, grid.dx())).collect();
        let s2: Vec<f64> = (0..n2).map(|k| axis_symbol(k, n2, grid.dy())).collect();
        let mut symbol = Vec::with_capacity(grid.len());
        for a in &s1 {
            for b in &s2 {
                symbol.push(-(a + b));
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            grid,
            symbol,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Fourier symbol of `lapl_h`, laid out like a field (`k1 * n2 + k2`).
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn fft2(&self, buf: &mut [Complex<f64>], forward: bool) {
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let (along2, along1) = if forward {
            (&self.fwd2, &self.fwd1)
        } else {
            (&self.inv2, &self.inv1)
        };
        // Rows are contiguous.
        along2.process(buf);
        let mut col = vec![Complex::new(0.0, 0.0); n1 * n2];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                col[i2 * n1 + i1] = buf[i1 * n2 + i2];
            }
        }
        along1.process(&mut col);
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                buf[i1 * n2 + i2] = col[i2 * n1 + i1];
            }
        }
    }

    /// Minimal-norm `psi` with `lapl_h psi = rhs - (null-mode part of rhs)`.
    pub fn solve_poisson(&self, rhs: &ScalarField) -> Result<ScalarField> {
        self.grid.require_same(&rhs.grid())?;
        let mut buf: Vec<Complex<f64>> = rhs.values().iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft2(&mut buf, true);
        for (c, &s) in buf.iter_mut().zip(&self.symbol) {
            *c = if s == 0.0 { Complex::new(0.0, 0.0) } else { *c / s };
        }
        self.fft2(&mut buf, false);
        let norm = 1.0 / self.grid.len() as f64;
        let values = buf.iter().map(|c| c.re * norm).collect();
        Ok(ScalarField::from_raw(self.grid, values))
    }

    /// `w - grad_h psi` with `lapl_h psi = div_h w`.
    pub fn project(&self, w: &VectorField) -> Result<VectorField> {
        self.grid.require_same(&w.grid())?;
        let psi = self.solve_poisson(&div_h(w))?;
        Ok(w.sub(&grad_h(&psi)))
    }

    /// Cell-average a pointwise vector function, then project.
    pub fn project_init<F>(&self, f: F) -> Result<VectorField>
    where
        F: Fn(f64, f64) -> (f64, f64),
    {
        let averaged = cell_average_vector(f, self.grid, DEFAULT_QUADRATURE)?;
        self.project(&averaged)
    }
}

/// Convenience wrapper building a one-off solver.
pub fn project_init<F>(f: F, grid: GridSpec) -> Result<VectorField>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    PoissonSolver::new(grid)?.project_init(f)
}

/// `||div_h w||_L2`.
pub fn divergence_norm(w: &VectorField) -> f64 {
    div_h(w).l2_norm()
}

/// Checks `||div_h w|| <= tol * ||w|| / h`.
pub fn check_divergence_free(w: &VectorField, tol: f64) -> Result<()> {
    let d = divergence_norm(w);
    let bound = tol * crate::mesh::l2_norm(w) / w.grid().h();
    if d > bound {
        return Err(Error::Invariant(format!(
            "discrete divergence {d:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(())
}
