//! The single-sample time stepper.
//!
//! One step of the theta scheme solves
//!
//! ```text
//! (u* - u^n) / dt + C(u^n, ubar) = D(ubar),   ubar = theta u* + (1 - theta) u^n
//! u^{n+1} = u^n + P(u* - u^n)
//! ```
//!
//! The implicit relation for `u*` is solved by Picard iteration starting
//! from `u^n`. `C` is in flux-difference form with the centered flux
//! `F^m(uL, uR, vL, vR) = (uL_m + uR_m) / 4 * (vL + vR)`; `D` is the
//! jump-weighted numerical viscosity `eps * sum_m (|[u]| [u])_{i} - (|[u]| [u])_{i-e_m}) / dx_m`.

use std::io::Write;

use log::debug;

use crate::error::{Error, Result};
use crate::leray::{divergence_norm, PoissonSolver};
use crate::mesh::{l2_norm, GridSpec, ScalarField, VectorField, Wrap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn component(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub theta: f64,
    pub epsilon: f64,
    pub cfl: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    /// Smallest admissible time step; also the sliver below which a step is
    /// stretched to land on the next output time.
    pub dt_floor: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            epsilon: 0.1,
            cfl: 0.5,
            picard_tol: 1e-10,
            picard_max_iters: 50,
            dt_floor: 1e-12,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.theta > 0.5 && self.theta <= 1.0) {
            return bad(format!("theta = {} must lie in (1/2, 1]", self.theta));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon = {} must be nonnegative", self.epsilon));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return bad(format!("cfl = {} must be positive", self.cfl));
        }
        if !(self.picard_tol > 0.0) {
            return bad(format!("picard_tol = {} must be positive", self.picard_tol));
        }
        if self.picard_max_iters == 0 {
            return bad("picard_max_iters must be positive".into());
        }
        if !(self.dt_floor > 0.0) {
            return bad(format!("dt_floor = {} must be positive", self.dt_floor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub field: VectorField,
}

/// Per-step record; step 0 describes the initial datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub energy: f64,
    pub picard_iters: usize,
    pub divergence: f64,
    /// `sum_m sum_i |u_{i+e_m} - u_i|^3 dx dy dt` for the step's input state.
    pub jump_cubed: f64,
}

pub const STEP_CSV_HEADER: &str = "step,time,dt,energy,picard_iters";

impl StepRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.step, self.time, self.dt, self.energy, self.picard_iters
        )
    }

    pub fn parse_csv_row(line: &str) -> Option<Self> {
        let mut it = line.split(',');
        let rec = StepRecord {
            step: it.next()?.trim().parse().ok()?,
            time: it.next()?.trim().parse().ok()?,
            dt: it.next()?.trim().parse().ok()?,
            energy: it.next()?.trim().parse().ok()?,
            picard_iters: it.next()?.trim().parse().ok()?,
            divergence: f64::NAN,
            jump_cubed: f64::NAN,
        };
        it.next().is_none().then_some(rec)
    }
}

pub fn write_step_csv(mut w: impl Write, records: &[StepRecord]) -> std::io::Result<()> {
    writeln!(w, "{STEP_CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Fields at the requested output times plus the per-step history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub outputs: Vec<State>,
    pub steps: Vec<StepRecord>,
    pub params: SchemeParams,
}

impl Trajectory {
    /// Total-variation statistic `sum_n jump_cubed_n / h`.
    pub fn jump_statistic(&self, h: f64) -> f64 {
        self.steps.iter().skip(1).map(|s| s.jump_cubed).sum::<f64>() / h
    }
}

#[inline]
pub fn flux(ul: [f64; 2], ur: [f64; 2], vl: [f64; 2], vr: [f64; 2], m: Axis) -> [f64; 2] {
    let k = m.component();
    let a = (ul[k] + ur[k]) / 4.0;
    [a * (vl[0] + vr[0]), a * (vl[1] + vr[1])]
}

/// Face fluxes `F^m` at the `i + e_m / 2` face of every cell, for both axes.
fn face_fluxes(u: &VectorField, v: &VectorField) -> [[Vec<f64>; 2]; 2] {
    let g = u.grid();
    let (w1, w2) = (Wrap::new(g.n1()), Wrap::new(g.n2()));
    let n2 = g.n2();
    let (uu, uv) = (u.u().values(), u.v().values());
    let (vu, vv) = (v.u().values(), v.v().values());
    let mut fx = [vec![0.0; g.len()], vec![0.0; g.len()]];
    let mut fy = [vec![0.0; g.len()], vec![0.0; g.len()]];
    for i1 in 0..g.n1() {
        let (r, rp) = (i1 * n2, w1.plus[i1] * n2);
        for i2 in 0..n2 {
            let i = r + i2;
            let ip = rp + i2;
            let f = flux([uu[i], uv[i]], [uu[ip], uv[ip]], [vu[i], vv[i]], [vu[ip], vv[ip]], Axis::X);
            fx[0][i] = f[0];
            fx[1][i] = f[1];
            let jp = r + w2.plus[i2];
            let f = flux([uu[i], uv[i]], [uu[jp], uv[jp]], [vu[i], vv[i]], [vu[jp], vv[jp]], Axis::Y);
            fy[0][i] = f[0];
            fy[1][i] = f[1];
        }
    }
    [fx, fy]
}

/// `C(u, v)`: convective operator in flux-difference form.
pub fn convective(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    u.grid().require_same(&v.grid())?;
    let g = u.grid();
    let [fx, fy] = face_fluxes(u, v);
    Ok(flux_divergence(g, &fx, &fy, None))
}

/// `(F_i - F_{i-e1}) / dx + (G_i - G_{i-e2}) / dy`, optionally times `scale`.
fn flux_divergence(g: GridSpec, fx: &[Vec<f64>; 2], fy: &[Vec<f64>; 2], scale: Option<f64>) -> VectorField {
    let (w1, w2) = (Wrap::new(g.n1()), Wrap::new(g.n2()));
    let n2 = g.n2();
    let (dx, dy) = (g.dx(), g.dy());
    let mut out = [vec![0.0; g.len()], vec![0.0; g.len()]];
    for c in 0..2 {
        for i1 in 0..g.n1() {
            let (r, rm) = (i1 * n2, w1.minus[i1] * n2);
            for i2 in 0..n2 {
                let i = r + i2;
                let s = (fx[c][i] - fx[c][rm + i2]) / dx + (fy[c][i] - fy[c][r + w2.minus[i2]]) / dy;
                out[c][i] = match scale {
                    Some(eps) => eps * s,
                    None => s,
                };
            }
        }
    }
    let [a, b] = out;
    VectorField::from_parts(ScalarField::from_raw(g, a), ScalarField::from_raw(g, b))
}

/// `D(v)`: numerical viscosity `eps * sum_m (|J|J)_i - (|J|J)_{i-e_m}) / dx_m`
/// with jumps `J_{i,m} = v_{i+e_m} - v_i`.
pub fn diffusive(v: &VectorField, epsilon: f64) -> VectorField {
    let g = v.grid();
    if epsilon == 0.0 {
        return VectorField::zeros(g);
    }
    let (w1, w2) = (Wrap::new(g.n1()), Wrap::new(g.n2()));
    let n2 = g.n2();
    let (a, b) = (v.u().values(), v.v().values());
    let mut gx = [vec![0.0; g.len()], vec![0.0; g.len()]];
    let mut gy = [vec![0.0; g.len()], vec![0.0; g.len()]];
    for i1 in 0..g.n1() {
        let (r, rp) = (i1 * n2, w1.plus[i1] * n2);
        for i2 in 0..n2 {
            let i = r + i2;
            for (gm, j) in [(&mut gx, rp + i2), (&mut gy, r + w2.plus[i2])] {
                let (ja, jb) = (a[j] - a[i], b[j] - b[i]);
                let norm = (ja * ja + jb * jb).sqrt();
                gm[0][i] = norm * ja;
                gm[1][i] = norm * jb;
            }
        }
    }
    flux_divergence(g, &gx, &gy, Some(epsilon))
}

/// CFL step `lambda * h / max(max_i max(|u_i|, |v_i|), 1)`.
pub fn cfl_dt(u: &VectorField, params: &SchemeParams, h: f64) -> f64 {
    let speed = u.max_speed().max(1.0);
    params.cfl * h / speed
}

/// `sum_m sum_i |u_{i+e_m} - u_i|^3 dx dy`.
pub fn jump_cubed_sum(u: &VectorField) -> f64 {
    let g = u.grid();
    let (w1, w2) = (Wrap::new(g.n1()), Wrap::new(g.n2()));
    let (a, b) = (u.u().values(), u.v().values());
    let mut acc = 0.0;
    for i1 in 0..g.n1() {
        for i2 in 0..g.n2() {
            let i = g.index(i1, i2);
            for j in [g.index(w1.plus[i1], i2), g.index(i1, w2.plus[i2])] {
                let (ja, jb) = (a[j] - a[i], b[j] - b[i]);
                acc += (ja * ja + jb * jb).powf(1.5);
            }
        }
    }
    acc * g.cell_area()
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub picard_iters: usize,
    pub picard_change: f64,
}

/// Advances `s` by `dt`.
pub fn step(s: &State, params: &SchemeParams, dt: f64, solver: &PoissonSolver) -> Result<(State, StepInfo)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    let un = &s.field;
    solver.grid().require_same(&un.grid())?;
    let theta = params.theta;

    let mut ustar = un.clone();
    let mut change = f64::INFINITY;
    let mut iters = 0;
    while iters < params.picard_max_iters {
        iters += 1;
        let ubar = if theta == 1.0 { ustar.clone() } else { ustar.lincomb(theta, un, 1.0 - theta) };
        let rhs = diffusive(&ubar, params.epsilon).sub(&convective(un, &ubar)?);
        let next = un.lincomb(1.0, &rhs, dt);
        let norm = l2_norm(&next);
        let delta = l2_norm(&next.sub(&ustar));
        change = if norm > 0.0 { delta / norm } else { delta };
        ustar = next;
        if !change.is_finite() {
            return Err(Error::NonFinite("Picard iterate"));
        }
        if change <= params.picard_tol {
            break;
        }
    }
    if change > params.picard_tol {
        return Err(Error::PicardDiverged {
            iterations: iters,
            change,
            tolerance: params.picard_tol,
        });
    }
    let increment = solver.project(&ustar.sub(un))?;
    let field = un.add(&increment);
    if !field.is_finite() {
        return Err(Error::NonFinite("projected update"));
    }
    Ok((
        State {
            time: s.time + dt,
            field,
        },
        StepInfo {
            picard_iters: iters,
            picard_change: change,
        },
    ))
}

/// Piecewise-linear-in-time interpolant between two consecutive states.
pub fn interpolate(a: &State, b: &State, t: f64) -> Result<VectorField> {
    let span = b.time - a.time;
    if !(span > 0.0) || t < a.time || t > b.time {
        return Err(Error::InvalidParameter(format!(
            "t = {t} outside [{}, {}]",
            a.time, b.time
        )));
    }
    let wb = (t - a.time) / span;
    Ok(a.field.lincomb(1.0 - wb, &b.field, wb))
}

pub(crate) fn validate_output_times(t_end: f64, output_times: &[f64]) -> Result<()> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} must be nonnegative")));
    }
    for w in output_times.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidParameter("output times must be strictly increasing".into()));
        }
    }
    if let Some(bad) = output_times.iter().find(|&&t| !(0.0..=t_end).contains(&t)) {
        return Err(Error::InvalidParameter(format!("output time {bad} outside [0, {t_end}]")));
    }
    Ok(())
}

/// Steps from `init` at t = 0 to `t_end`, landing exactly on every output time.
pub fn evolve(
    init: &VectorField,
    t_end: f64,
    output_times: &[f64],
    params: &SchemeParams,
    solver: &PoissonSolver,
) -> Result<Trajectory> {
    params.validate()?;
    validate_output_times(t_end, output_times)?;
    let h = init.grid().h();

    let mut targets: Vec<f64> = output_times.to_vec();
    if targets.last().is_none_or(|&t| t < t_end) {
        targets.push(t_end);
    }

    let mut state = State {
        time: 0.0,
        field: init.clone(),
    };
    let mut steps = vec![StepRecord {
        step: 0,
        time: 0.0,
        dt: 0.0,
        energy: l2_norm(init),
        picard_iters: 0,
        divergence: divergence_norm(init),
        jump_cubed: 0.0,
    }];
    let mut outputs = Vec::with_capacity(output_times.len());
    let mut next_output = 0;

    for &target in &targets {
        while state.time < target {
            let remaining = target - state.time;
            let mut dt = cfl_dt(&state.field, params, h);
            if dt < params.dt_floor {
                return Err(Error::TimeStepCollapse { dt, time: state.time });
            }
            let lands = dt >= remaining || remaining - dt < params.dt_floor;
            if lands {
                dt = remaining;
            }
            let jump = jump_cubed_sum(&state.field) * dt;
            let (mut next, info) = step(&state, params, dt, solver)?;
            if lands {
                next.time = target;
            }
            let record = StepRecord {
                step: steps.len(),
                time: next.time,
                dt,
                energy: l2_norm(&next.field),
                picard_iters: info.picard_iters,
                divergence: divergence_norm(&next.field),
                jump_cubed: jump,
            };
            debug!(
                "step {} t={:.6} dt={:.3e} energy={:.12} picard={} change={:.2e}",
                record.step, record.time, dt, record.energy, info.picard_iters, info.picard_change
            );
            steps.push(record);
            state = next;
        }
        while next_output < output_times.len() && output_times[next_output] == state.time {
            outputs.push(state.clone());
            next_output += 1;
        }
    }
    debug_assert_eq!(outputs.len(), output_times.len());
    Ok(Trajectory {
        outputs,
        steps,
        params: *params,
    })
}
