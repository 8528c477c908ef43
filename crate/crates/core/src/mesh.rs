//! Uniform periodic grids on the unit torus, piecewise-constant fields, and
//! the centered finite-difference operators the scheme is built from.
//!
//! Cell `(i1, i2)` covers `[i1*dx, (i1+1)*dx) x [i2*dy, (i2+1)*dy)`; values
//! are stored row-major with `i2` contiguous, i.e. at `i1 * n2 + i2`. All
//! index arithmetic wraps periodically; there are no ghost cells.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    n1: usize,
    n2: usize,
}

impl GridSpec {
    /// Both dimensions must be even and at least 2. Operators that rely on the
    /// four-mode null space of the stride-2 Laplacian additionally require 4.
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if n < 2 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n}, cell counts must be even and positive"
                )));
            }
            if n > u32::MAX as usize {
                return Err(Error::InvalidGrid(format!("{name} = {n} is too large")));
            }
        }
        Ok(Self { n1, n2 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n1 as f64
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.n2 as f64
    }

    /// Smallest cell width.
    pub fn h(&self) -> f64 {
        self.dx().min(self.dy())
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }

    /// Index of `(i1 + s1, i2 + s2)` with periodic wrapping.
    #[inline]
    pub fn wrapped_index(&self, i1: usize, i2: usize, s1: isize, s2: isize) -> usize {
        let j1 = (i1 as isize + s1).rem_euclid(self.n1 as isize) as usize;
        let j2 = (i2 as isize + s2).rem_euclid(self.n2 as isize) as usize;
        self.index(j1, j2)
    }

    pub fn midpoint(&self, i1: usize, i2: usize) -> (f64, f64) {
        ((i1 as f64 + 0.5) * self.dx(), (i2 as f64 + 0.5) * self.dy())
    }

    pub(crate) fn require_min(&self, min: usize) -> Result<()> {
        if self.n1 < min || self.n2 < min {
            return Err(Error::InvalidGrid(format!(
                "{self} is too small, need at least {min} cells per axis"
            )));
        }
        Ok(())
    }

    pub(crate) fn require_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n1, self.n2)
    }
}

/// Precomputed periodic neighbour indices along one axis.
pub(crate) struct Wrap {
    pub minus: Vec<usize>,
    pub plus: Vec<usize>,
    pub minus2: Vec<usize>,
    pub plus2: Vec<usize>,
}

impl Wrap {
    pub fn new(n: usize) -> Self {
        Self {
            minus: (0..n).map(|i| (i + n - 1) % n).collect(),
            plus: (0..n).map(|i| (i + 1) % n).collect(),
            minus2: (0..n).map(|i| (i + n - 2) % n).collect(),
            plus2: (0..n).map(|i| (i + 2) % n).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values supplied for a {grid} grid",
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                values.push(f(i1, i2));
            }
        }
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i1: usize, i2: usize) -> f64 {
        self.values[self.grid.index(i1, i2)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Cyclic shift: the result at `i` is the input at `i - (s1, s2)`.
    pub fn shifted(&self, s1: isize, s2: isize) -> Self {
        let g = self.grid;
        Self::from_fn(g, |i1, i2| self.values[g.wrapped_index(i1, i2, -s1, -s2)])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Area-weighted discrete L2 norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|x| x * x).sum();
        (s * self.grid.cell_area()).sqrt()
    }

    fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_raw(self.grid, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    u: ScalarField,
    v: ScalarField,
}

impl VectorField {
    pub fn new(u: ScalarField, v: ScalarField) -> Result<Self> {
        u.grid.require_same(&v.grid)?;
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite("vector field"));
        }
        Ok(Self { u, v })
    }

    pub(crate) fn from_parts(u: ScalarField, v: ScalarField) -> Self {
        debug_assert_eq!(u.grid, v.grid);
        Self { u, v }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_parts(ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    pub fn constant(grid: GridSpec, u: f64, v: f64) -> Self {
        Self::from_parts(ScalarField::constant(grid, u), ScalarField::constant(grid, v))
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut u = Vec::with_capacity(grid.len());
        let mut v = Vec::with_capacity(grid.len());
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                let (a, b) = f(i1, i2);
                u.push(a);
                v.push(b);
            }
        }
        Self::from_parts(ScalarField::from_raw(grid, u), ScalarField::from_raw(grid, v))
    }

    pub fn grid(&self) -> GridSpec {
        self.u.grid
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn v(&self) -> &ScalarField {
        &self.v
    }

    pub fn into_components(self) -> (ScalarField, ScalarField) {
        (self.u, self.v)
    }

    #[cfg(test)]
    pub(crate) fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.u.values, &mut self.v.values)
    }

    pub fn at(&self, i: usize) -> [f64; 2] {
        [self.u.values[i], self.v.values[i]]
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn shifted(&self, s1: isize, s2: isize) -> Self {
        Self::from_parts(self.u.shifted(s1, s2), self.v.shifted(s1, s2))
    }

    /// Largest single-component magnitude over all cells.
    pub fn max_speed(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_parts(
            self.u.zip_map(&other.u, |a, b| a - b),
            self.v.zip_map(&other.v, |a, b| a - b),
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |f: &ScalarField| ScalarField::from_raw(f.grid, f.values.iter().map(|x| c * x).collect());
        Self::from_parts(s(&self.u), s(&self.v))
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        Self::from_parts(
            self.u.zip_map(&other.u, |x, y| a * x + b * y),
            self.v.zip_map(&other.v, |x, y| a * x + b * y),
        )
    }
}

/// Centered divergence `(u(i+e1) - u(i-e1)) / 2dx + (v(i+e2) - v(i-e2)) / 2dy`.
pub fn div_h(w: &VectorField) -> ScalarField {
    let g = w.grid();
    let (w1, w2) = (Wrap::new(g.n1), Wrap::new(g.n2));
    let (u, v) = (w.u.values(), w.v.values());
    let (two_dx, two_dy) = (2.0 * g.dx(), 2.0 * g.dy());
    let mut out = vec![0.0; g.len()];
    for i1 in 0..g.n1 {
        let (rm, rp, r) = (w1.minus[i1] * g.n2, w1.plus[i1] * g.n2, i1 * g.n2);
        for i2 in 0..g.n2 {
            out[r + i2] = (u[rp + i2] - u[rm + i2]) / two_dx
                + (v[r + w2.plus[i2]] - v[r + w2.minus[i2]]) / two_dy;
        }
    }
    ScalarField::from_raw(g, out)
}

/// Centered gradient.
pub fn grad_h(psi: &ScalarField) -> VectorField {
    let g = psi.grid();
    let (w1, w2) = (Wrap::new(g.n1), Wrap::new(g.n2));
    let p = psi.values();
    let (two_dx, two_dy) = (2.0 * g.dx(), 2.0 * g.dy());
    let mut gu = vec![0.0; g.len()];
    let mut gv = vec![0.0; g.len()];
    for i1 in 0..g.n1 {
        let (rm, rp, r) = (w1.minus[i1] * g.n2, w1.plus[i1] * g.n2, i1 * g.n2);
        for i2 in 0..g.n2 {
            gu[r + i2] = (p[rp + i2] - p[rm + i2]) / two_dx;
            gv[r + i2] = (p[r + w2.plus[i2]] - p[r + w2.minus[i2]]) / two_dy;
        }
    }
    VectorField::from_parts(ScalarField::from_raw(g, gu), ScalarField::from_raw(g, gv))
}

/// Stride-2 five-point Laplacian. Evaluated as centered differences of the
/// centered gradient so it agrees with `div_h(grad_h(psi))` bit for bit.
pub fn lapl_h(psi: &ScalarField) -> ScalarField {
    let g = psi.grid();
    let (w1, w2) = (Wrap::new(g.n1), Wrap::new(g.n2));
    let p = psi.values();
    let (two_dx, two_dy) = (2.0 * g.dx(), 2.0 * g.dy());
    let mut out = vec![0.0; g.len()];
    for i1 in 0..g.n1 {
        let (rm, rp, r) = (w1.minus2[i1] * g.n2, w1.plus2[i1] * g.n2, i1 * g.n2);
        for i2 in 0..g.n2 {
            let c = p[r + i2];
            let gx = (p[rp + i2] - c) / two_dx - (c - p[rm + i2]) / two_dx;
            let gy = (p[r + w2.plus2[i2]] - c) / two_dy - (c - p[r + w2.minus2[i2]]) / two_dy;
            out[r + i2] = gx / two_dx + gy / two_dy;
        }
    }
    ScalarField::from_raw(g, out)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let legendre = |x: f64| {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=q {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        // (P_q(x), P_q'(x))
        (p1, q as f64 * (x * p1 - p0) / (x * x - 1.0))
    };
    for i in 0..q.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_q.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    (nodes, weights)
}

struct CellQuadrature {
    /// Offsets within a cell, as fractions of the cell width.
    frac: Vec<f64>,
    /// Weights normalized to sum to one per axis.
    weights: Vec<f64>,
}

impl CellQuadrature {
    fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("quadrature order must be >= 1".into()));
        }
        let (nodes, weights) = gauss_legendre(q);
        let total: f64 = weights.iter().sum();
        Ok(Self {
            frac: nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }
}

/// Cell means of a pointwise function by `q x q` tensor Gauss–Legendre quadrature.
pub fn cell_average<F>(f: F, grid: GridSpec, q: usize) -> Result<ScalarField>
where
    F: Fn(f64, f64) -> f64,
{
    let quad = CellQuadrature::new(q)?;
    let (dx, dy) = (grid.dx(), grid.dy());
    let field = ScalarField::from_fn(grid, |i1, i2| {
        let (x0, y0) = (i1 as f64 * dx, i2 as f64 * dy);
        let mut acc = 0.0;
        for (a, wa) in quad.frac.iter().zip(&quad.weights) {
            for (b, wb) in quad.frac.iter().zip(&quad.weights) {
                acc += wa * wb * f(x0 + a * dx, y0 + b * dy);
            }
        }
        acc
    });
    if !field.is_finite() {
        return Err(Error::NonFinite("cell average"));
    }
    Ok(field)
}

/// Componentwise [`cell_average`] of a vector-valued function.
pub fn cell_average_vector<F>(f: F, grid: GridSpec, q: usize) -> Result<VectorField>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    let quad = CellQuadrature::new(q)?;
    let (dx, dy) = (grid.dx(), grid.dy());
    let field = VectorField::from_fn(grid, |i1, i2| {
        let (x0, y0) = (i1 as f64 * dx, i2 as f64 * dy);
        let (mut au, mut av) = (0.0, 0.0);
        for (a, wa) in quad.frac.iter().zip(&quad.weights) {
            for (b, wb) in quad.frac.iter().zip(&quad.weights) {
                let (fu, fv) = f(x0 + a * dx, y0 + b * dy);
                au += wa * wb * fu;
                av += wa * wb * fv;
            }
        }
        (au, av)
    });
    if !field.is_finite() {
        return Err(Error::NonFinite("cell average"));
    }
    Ok(field)
}

/// Block-average onto a grid coarser by `factor` in each direction.
pub fn restrict(fine: &VectorField, factor: usize) -> Result<VectorField> {
    let g = fine.grid();
    if factor == 0 || !g.n1.is_multiple_of(factor) || !g.n2.is_multiple_of(factor) {
        return Err(Error::InvalidGrid(format!(
            "cannot restrict a {g} grid by a factor of {factor}"
        )));
    }
    let coarse = GridSpec::new(g.n1 / factor, g.n2 / factor)?;
    let norm = 1.0 / (factor * factor) as f64;
    let block = |f: &ScalarField| {
        ScalarField::from_fn(coarse, |c1, c2| {
            let mut acc = 0.0;
            for a in 0..factor {
                for b in 0..factor {
                    acc += f.values[g.index(c1 * factor + a, c2 * factor + b)];
                }
            }
            acc * norm
        })
    };
    Ok(VectorField::from_parts(block(&fine.u), block(&fine.v)))
}

/// Piecewise-constant injection onto a grid finer by `factor`.
pub fn prolong(coarse: &VectorField, factor: usize) -> Result<VectorField> {
    let g = coarse.grid();
    let fine = GridSpec::new(g.n1 * factor, g.n2 * factor)?;
    Ok(VectorField::from_fn(fine, |i1, i2| {
        let i = g.index(i1 / factor, i2 / factor);
        (coarse.u.values[i], coarse.v.values[i])
    }))
}

pub fn l2_norm(w: &VectorField) -> f64 {
    let s: f64 = w
        .u
        .values
        .iter()
        .zip(&w.v.values)
        .map(|(a, b)| a * a + b * b)
        .sum();
    (s * w.grid().cell_area()).sqrt()
}

pub fn l2_inner(a: &VectorField, b: &VectorField) -> Result<f64> {
    a.grid().require_same(&b.grid())?;
    let s: f64 = (0..a.grid().len())
        .map(|i| a.u.values[i] * b.u.values[i] + a.v.values[i] * b.v.values[i])
        .sum();
    Ok(s * a.grid().cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g(n: usize) -> GridSpec {
        GridSpec::square(n).unwrap()
    }

    #[test]
    fn grid_rejects_odd_and_tiny() {
        assert!(GridSpec::new(7, 8).is_err());
        assert!(GridSpec::new(8, 0).is_err());
        assert!(GridSpec::new(1, 8).is_err());
        let grid = g(64);
        assert_eq!(grid.dx(), 1.0 / 64.0);
        assert_eq!(grid.midpoint(0, 1), (0.5 / 64.0, 1.5 / 64.0));
    }

    #[test]
    fn div_of_constant_and_checkerboard_is_zero() {
        let w = VectorField::constant(g(8), 3.0, -7.0);
        assert!(div_h(&w).values().iter().all(|&x| x == 0.0));
        let cb = VectorField::from_fn(g(8), |i1, _| (if i1 % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
        assert!(div_h(&cb).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn div_of_sine_mode() {
        let grid = g(64);
        let dx = grid.dx();
        let w = VectorField::from_fn(grid, |i1, i2| ((2.0 * PI * grid.midpoint(i1, i2).0).sin(), 0.0));
        let d = div_h(&w);
        for i1 in 0..64 {
            for i2 in 0..64 {
                let x = grid.midpoint(i1, i2).0;
                let expect = (2.0 * PI * x).cos() * (2.0 * PI * dx).sin() / dx;
                assert!((d.get(i1, i2) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grad_of_sine_and_checkerboard() {
        let grid = g(32);
        let dy = grid.dy();
        let psi = ScalarField::from_fn(grid, |i1, i2| (2.0 * PI * grid.midpoint(i1, i2).1).sin());
        let gr = grad_h(&psi);
        for i1 in 0..32 {
            for i2 in 0..32 {
                let y = grid.midpoint(i1, i2).1;
                assert_eq!(gr.u().get(i1, i2), 0.0);
                let expect = (2.0 * PI * y).cos() * (2.0 * PI * dy).sin() / dy;
                assert!((gr.v().get(i1, i2) - expect).abs() < 1e-12);
            }
        }
        let cb = ScalarField::from_fn(grid, |i1, i2| if (i1 + i2) % 2 == 0 { 1.0 } else { -1.0 });
        let gcb = grad_h(&cb);
        assert_eq!(gcb.max_speed(), 0.0);
        assert_eq!(grad_h(&ScalarField::constant(grid, 5.0)).max_speed(), 0.0);
    }

    #[test]
    fn laplacian_is_div_of_grad() {
        for (n1, n2) in [(8, 8), (16, 8), (32, 32)] {
            let grid = GridSpec::new(n1, n2).unwrap();
            let mut rng = crate::rng::SeededRng::new(n1 as u64, n2 as u64);
            let psi = ScalarField::from_fn(grid, |_, _| rng.symmetric() * 3.0);
            assert_eq!(lapl_h(&psi), div_h(&grad_h(&psi)));
        }
    }

    #[test]
    fn laplacian_sine_eigenvalue() {
        let grid = g(32);
        let dx = grid.dx();
        let psi = ScalarField::from_fn(grid, |i1, i2| (2.0 * PI * grid.midpoint(i1, i2).0).sin());
        let l = lapl_h(&psi);
        let lambda = -(2.0 * PI * dx).sin().powi(2) / (dx * dx);
        for (a, b) in l.values().iter().zip(psi.values()) {
            assert!((a - lambda * b).abs() < 1e-10);
        }
        assert!(lapl_h(&ScalarField::constant(grid, 2.5)).max_abs() == 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in 1..=6 {
            let (x, w) = gauss_legendre(q);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..2 * q {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn cell_average_simple_cases() {
        let grid = g(8);
        let c = cell_average(|_, _| 4.25, grid, 2).unwrap();
        assert!(c.values().iter().all(|&x| (x - 4.25).abs() < 1e-15));
        let lin = cell_average(|x, _| x, grid, 3).unwrap();
        assert!((lin.get(0, 0) - grid.dx() / 2.0).abs() < 1e-15);
        assert!(cell_average(|x, _| x, grid, 0).is_err());
    }

    #[test]
    fn cell_average_sine_matches_fine_midpoint_rule() {
        let grid = g(16);
        let dx = grid.dx();
        let avg = cell_average(|x, _| (2.0 * PI * x).sin(), grid, 3).unwrap();
        let sub = 256;
        for i1 in 0..16 {
            let mut acc = 0.0;
            for a in 0..sub {
                let x = (i1 as f64 + (a as f64 + 0.5) / sub as f64) * dx;
                acc += (2.0 * PI * x).sin();
            }
            let midpoint = acc / sub as f64;
            // The midpoint rule itself is only accurate to (dx/256)^2 (2 pi)^2 / 24 ~ 1e-7.
            assert!((avg.get(i1, 3) - midpoint).abs() < 2e-7);
            let (a, b) = (i1 as f64 * dx, (i1 + 1) as f64 * dx);
            let exact = ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI * dx);
            assert!((avg.get(i1, 3) - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn restrict_examples() {
        let c = restrict(&VectorField::constant(g(8), 1.5, -2.0), 2).unwrap();
        assert_eq!(c.grid(), g(4));
        assert!(c.u().values().iter().all(|&x| x == 1.5));
        let pattern = [[1.0, 2.0], [3.0, 4.0]];
        let w = VectorField::from_fn(g(4), |i1, i2| (pattern[i1 % 2][i2 % 2], 0.0));
        let r = restrict(&w, 2).unwrap();
        assert_eq!(r.grid(), g(2));
        assert!(r.u().values().iter().all(|&x| x == 2.5));
        assert!(restrict(&w, 3).is_err());
    }

    #[test]
    fn prolong_then_restrict_is_identity() {
        let w = VectorField::from_fn(g(8), |i1, i2| ((i1 * 3 + i2) as f64, (i2 as f64).sin()));
        let back = restrict(&prolong(&w, 2).unwrap(), 2).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn norms() {
        let one = VectorField::constant(g(16), 1.0, 0.0);
        assert!((l2_norm(&one) - 1.0).abs() < 1e-15);
        let w = VectorField::from_fn(g(16), |i1, i2| ((i1 as f64).cos(), (i2 as f64 * 0.3).sin()));
        assert!((l2_inner(&w, &w).unwrap() - l2_norm(&w).powi(2)).abs() < 1e-14);
        assert!(l2_inner(&w, &VectorField::zeros(g(8))).is_err());
    }

    #[test]
    fn shift_moves_values() {
        let s = ScalarField::from_fn(g(4), |i1, i2| (i1 * 4 + i2) as f64);
        let t = s.shifted(1, 0);
        assert_eq!(t.get(1, 0), s.get(0, 0));
        assert_eq!(t.get(0, 2), s.get(3, 2));
    }
}
