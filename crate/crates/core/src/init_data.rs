//! Random initial data: perturbed double shear layers and fractional
//! Brownian bridges. Every generator ends with the discrete Leray projection,
//! so the returned fields are discretely divergence-free.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::leray::PoissonSolver;
use crate::mesh::{GridSpec, ScalarField, VectorField};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearLayerSpec {
    /// Smoothing width; `0` selects the discontinuous layer.
    pub rho: f64,
    /// Perturbation magnitude.
    pub gamma: f64,
    /// Even number `K`; the perturbation carries `K/2 + 1` sine modes.
    pub modes: usize,
}

impl Default for ShearLayerSpec {
    fn default() -> Self {
        Self {
            rho: 0.1,
            gamma: 0.025,
            modes: 10,
        }
    }
}

impl ShearLayerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho = {} must be >= 0", self.rho)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if !self.modes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("K = {} must be even", self.modes)));
        }
        Ok(())
    }
}

/// The i.i.d. uniform `Y_0 .. Y_{K+1}` of one perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDraw {
    y: Vec<f64>,
}

impl PerturbationDraw {
    pub fn len_for(modes: usize) -> usize {
        2 * (modes / 2 + 1)
    }

    pub fn draw(rng: &mut SeededRng, modes: usize) -> Self {
        let y = (0..Self::len_for(modes)).map(|_| rng.symmetric()).collect();
        Self { y }
    }

    pub fn from_values(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() || !y.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "perturbation draw needs an even, nonzero length, got {}",
                y.len()
            )));
        }
        if y.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("perturbation values must lie in [-1, 1]".into()));
        }
        Ok(Self { y })
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn modes(&self) -> usize {
        self.y.len() - 2
    }

    /// `sum_k Y_{2k} sin(2 pi (k + 1) (x + Y_{2k+1}))`.
    pub fn displacement(&self, x: f64) -> f64 {
        self.y
            .chunks_exact(2)
            .enumerate()
            .map(|(k, pair)| pair[0] * (2.0 * PI * (k + 1) as f64 * (x + pair[1])).sin())
            .sum()
    }
}

/// Unperturbed double shear layer velocity at `(x, y)`.
pub fn shear_layer_base(rho: f64) -> impl Fn(f64, f64) -> (f64, f64) + Copy {
    move |_x, y| {
        let u = if rho == 0.0 {
            if y > 0.25 && y < 0.75 {
                1.0
            } else {
                -1.0
            }
        } else if y <= 0.5 {
            ((y - 0.25) / rho).tanh()
        } else {
            ((0.75 - y) / rho).tanh()
        };
        (u, 0.0)
    }
}

fn wrap_unit(y: f64) -> f64 {
    let w = y.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Random displacement of the `y` coordinate, wrapped back into `[0, 1)`.
pub fn perturbation_map(draw: &PerturbationDraw, gamma: f64, point: (f64, f64)) -> (f64, f64) {
    let (x, y) = point;
    if gamma == 0.0 {
        return (x, y);
    }
    (x, wrap_unit(y + gamma * draw.displacement(x)))
}

pub fn make_shear_layer(spec: &ShearLayerSpec, rng: &mut SeededRng, solver: &PoissonSolver) -> Result<VectorField> {
    spec.validate()?;
    let draw = PerturbationDraw::draw(rng, spec.modes);
    let base = shear_layer_base(spec.rho);
    let gamma = spec.gamma;
    solver.project_init(|x, y| {
        let (px, py) = perturbation_map(&draw, gamma, (x, y));
        base(px, py)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmSpec {
    pub hurst: f64,
    pub amplitude: f64,
}

impl Default for FbmSpec {
    fn default() -> Self {
        Self {
            hurst: 0.5,
            amplitude: 1.0,
        }
    }
}

impl FbmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::InvalidParameter(format!("Hurst index {} must lie in (0, 1)", self.hurst)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude {} must be >= 0", self.amplitude)));
        }
        Ok(())
    }
}

/// One periodic fractional Brownian bridge on an `n x n` lattice by
/// diamond-square midpoint displacement. The corner value is pinned to zero
/// and refinement level `l` (1-based) adds Gaussian displacements of
/// standard deviation `amplitude * 2^(-l H)`.
pub fn fbm_bridge(spec: &FbmSpec, rng: &mut SeededRng, n: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::InvalidGrid(format!("fBm needs a power-of-two grid, got {n}")));
    }
    let at = |i: usize, j: usize| (i % n) * n + (j % n);
    let mut a = vec![0.0; n * n];
    let mut stride = n;
    let mut level = 1;
    while stride > 1 {
        let half = stride / 2;
        let sigma = spec.amplitude * 2f64.powf(-(level as f64) * spec.hurst);
        // Diamond: cell centres from the four corners.
        for i in (half..n).step_by(stride) {
            for j in (half..n).step_by(stride) {
                let avg = 0.25
                    * (a[at(i - half, j - half)]
                        + a[at(i - half, j + half)]
                        + a[at(i + half, j - half)]
                        + a[at(i + half, j + half)]);
                a[at(i, j)] = avg + sigma * rng.gaussian();
            }
        }
        // Square: edge midpoints from their four axis neighbours.
        for i in (0..n).step_by(half) {
            let start = if (i / half).is_multiple_of(2) { half } else { 0 };
            for j in (start..n).step_by(stride) {
                let avg = 0.25
                    * (a[at(i + n - half, j)] + a[at(i + half, j)] + a[at(i, j + n - half)] + a[at(i, j + half)]);
                a[at(i, j)] = avg + sigma * rng.gaussian();
            }
        }
        stride = half;
        level += 1;
    }
    Ok(a)
}

/// Both velocity components as independent bridges, then projected.
pub fn make_fbm(spec: &FbmSpec, rng: &mut SeededRng, solver: &PoissonSolver) -> Result<VectorField> {
    let grid = solver.grid();
    if grid.n1() != grid.n2() {
        return Err(Error::InvalidGrid(format!("fBm needs a square grid, got {grid}")));
    }
    let u = fbm_bridge(spec, rng, grid.n1())?;
    let v = fbm_bridge(spec, rng, grid.n1())?;
    let raw = VectorField::new(ScalarField::from_values(grid, u)?, ScalarField::from_values(grid, v)?)?;
    solver.project(&raw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDataSpec {
    ShearLayer(ShearLayerSpec),
    Fbm(FbmSpec),
}

impl InitialDataSpec {
    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        match self {
            InitialDataSpec::ShearLayer(s) => s.validate(),
            InitialDataSpec::Fbm(f) => {
                f.validate()?;
                if grid.n1() != grid.n2() || !grid.n1().is_power_of_two() {
                    return Err(Error::InvalidGrid(format!(
                        "fBm data needs a square power-of-two grid, got {grid}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Sample `index` of the initial distribution; depends only on
/// `(spec, seed, index)` and the grid.
pub fn sample_initial(spec: &InitialDataSpec, seed: u64, index: u64, solver: &PoissonSolver) -> Result<VectorField> {
    let mut rng = SeededRng::new(seed, index);
    match spec {
        InitialDataSpec::ShearLayer(s) => make_shear_layer(s, &mut rng, solver),
        InitialDataSpec::Fbm(f) => make_fbm(f, &mut rng, solver),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leray::divergence_norm;
    use crate::mesh::l2_norm;

    fn solver(n: usize) -> PoissonSolver {
        PoissonSolver::new(GridSpec::square(n).unwrap()).unwrap()
    }

    #[test]
    fn base_profile_values() {
        let disc = shear_layer_base(0.0);
        assert_eq!(disc(0.1, 0.5), (1.0, 0.0));
        assert_eq!(disc(0.9, 0.1), (-1.0, 0.0));
        assert_eq!(disc(0.0, 0.25), (-1.0, 0.0));
        assert_eq!(disc(0.0, 0.75), (-1.0, 0.0));
        let smooth = shear_layer_base(0.1);
        assert_eq!(smooth(0.3, 0.25), (0.0, 0.0));
        assert!((smooth(0.0, 0.5).0 - (2.5f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn perturbation_map_examples() {
        let draw = PerturbationDraw::from_values(vec![1.0, 0.0]).unwrap();
        let (x, y) = perturbation_map(&draw, 0.01, (0.25, 0.4));
        assert_eq!(x, 0.25);
        assert!((y - 0.41).abs() < 1e-15);
        let mut rng = SeededRng::new(3, 0);
        let d = PerturbationDraw::draw(&mut rng, 10);
        assert_eq!(d.values().len(), 12);
        assert_eq!(perturbation_map(&d, 0.0, (0.3, 0.7)), (0.3, 0.7));
        for k in 0..50 {
            let p = (k as f64 / 50.0, 0.99);
            let q = perturbation_map(&d, 0.5, p);
            assert_eq!(q.0, p.0);
            assert!((0.0..1.0).contains(&q.1));
        }
        assert!(PerturbationDraw::from_values(vec![0.5, 2.0]).is_err());
    }

    #[test]
    fn unperturbed_shear_is_symmetric_and_shear() {
        let s = solver(64);
        let spec = ShearLayerSpec { rho: 0.1, gamma: 0.0, modes: 10 };
        let f = make_shear_layer(&spec, &mut SeededRng::new(0, 0), &s).unwrap();
        assert!(f.v().values().iter().all(|&x| x == 0.0));
        let n = 64;
        for i2 in 0..n {
            // Even about y = 0.5: cell i2 mirrors to n - 1 - i2.
            let (a, b) = (f.u().get(5, i2), f.u().get(5, n - 1 - i2));
            assert!((a - b).abs() < 1e-8, "i2={i2}: {a} {b}");
        }
        for i2 in 0..n / 2 {
            // Odd about y = 0.25 on the lower half.
            let (a, b) = (f.u().get(5, i2), f.u().get(5, n / 2 - 1 - i2));
            assert!((a + b).abs() < 1e-8, "i2={i2}: {a} {b}");
        }
    }

    #[test]
    fn shear_samples_are_reproducible_and_divergence_free() {
        let s = solver(32);
        let spec = InitialDataSpec::ShearLayer(ShearLayerSpec::default());
        let a = sample_initial(&spec, 11, 2, &s).unwrap();
        let b = sample_initial(&spec, 11, 2, &s).unwrap();
        let c = sample_initial(&spec, 11, 3, &s).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(divergence_norm(&a) <= 1e-10 * l2_norm(&a) * 32.0);
        let det = InitialDataSpec::ShearLayer(ShearLayerSpec { gamma: 0.0, ..Default::default() });
        assert_eq!(sample_initial(&det, 1, 0, &s).unwrap(), sample_initial(&det, 1, 9, &s).unwrap());
    }

    #[test]
    fn fbm_basic_contract() {
        let s = solver(32);
        let zero = InitialDataSpec::Fbm(FbmSpec { hurst: 0.5, amplitude: 0.0 });
        assert_eq!(sample_initial(&zero, 1, 0, &s).unwrap().max_speed(), 0.0);
        let spec = InitialDataSpec::Fbm(FbmSpec::default());
        let a = sample_initial(&spec, 5, 1, &s).unwrap();
        assert_eq!(a, sample_initial(&spec, 5, 1, &s).unwrap());
        assert_ne!(a, sample_initial(&spec, 5, 2, &s).unwrap());
        assert!(divergence_norm(&a) <= 1e-10 * l2_norm(&a) * 32.0);
        let bad = PoissonSolver::new(GridSpec::square(24).unwrap()).unwrap();
        assert!(sample_initial(&spec, 5, 1, &bad).is_err());
        assert!(FbmSpec { hurst: 1.0, amplitude: 1.0 }.validate().is_err());
    }

    #[test]
    fn fbm_bridge_pins_corner() {
        let b = fbm_bridge(&FbmSpec::default(), &mut SeededRng::new(9, 9), 16).unwrap();
        assert_eq!(b[0], 0.0);
        assert!(b.iter().skip(1).all(|x| *x != 0.0));
    }

    #[test]
    fn fbm_sample_mean_is_near_zero() {
        let s = solver(16);
        let spec = InitialDataSpec::Fbm(FbmSpec::default());
        let m = 16;
        let fields: Vec<_> = (0..m).map(|i| sample_initial(&spec, 77, i, &s).unwrap()).collect();
        let band = 4.0 / (m as f64).sqrt();
        let cells = 16 * 16;
        let inside = (0..cells)
            .filter(|&i| (fields.iter().map(|f| f.at(i)[0]).sum::<f64>() / m as f64).abs() <= band)
            .count();
        assert!(inside as f64 >= 0.99 * cells as f64, "{inside}/{cells}");
    }
}
