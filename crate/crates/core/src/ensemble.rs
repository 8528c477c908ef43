//! Monte Carlo driver: sample, evolve and persist an ensemble.
//!
//! Run directory layout:
//!
//! ```text
//! manifest              key = value configuration, then a `[files]` table
//! fields/s{m}_t{k}.fld  sample m at output time k (binary field format)
//! diag/s{m}.csv         per-step diagnostics of sample m
//! run.lock              present while a process owns the directory
//! ```
//!
//! Files are written to a temporary name and renamed into place, so a
//! sample counts as finished exactly when its diagnostics file and all of
//! its field files exist. Resuming recomputes only unfinished samples.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::config::{ensemble_from_text, ensemble_lines};
use crate::error::{Error, ErrorKind, Result};
use crate::field_io::{read_field, write_field};
use crate::init_data::{sample_initial, InitialDataSpec};
use crate::leray::{check_divergence_free, PoissonSolver};
use crate::mesh::{GridSpec, VectorField};
use crate::scheme::{evolve, validate_output_times, write_step_csv, SchemeParams, StepRecord, STEP_CSV_HEADER};

pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;
pub const MANIFEST: &str = "manifest";
pub const LOCK_FILE: &str = "run.lock";
const MANIFEST_FORMAT: u32 = 1;

/// Slack for the per-sample energy monotonicity check.
pub const ENERGY_TOL: f64 = 1e-12;
/// Scaled divergence tolerance for stored fields.
pub const DIVERGENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub grid: GridSpec,
    pub data: InitialDataSpec,
    pub scheme: SchemeParams,
    pub samples: usize,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
    /// Bytes of field data kept in memory before results become file-backed.
    pub memory_budget: u64,
}

impl EnsembleConfig {
    /// `M = N` samples, one output at `t_end`.
    pub fn new(grid: GridSpec, data: InitialDataSpec, t_end: f64) -> Self {
        Self {
            grid,
            data,
            scheme: SchemeParams::default(),
            samples: grid.n1(),
            t_end,
            output_times: vec![t_end],
            seed: 0,
            workers: 0,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.require_min(4)?;
        self.data.validate(self.grid)?;
        self.scheme.validate()?;
        if self.samples == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one sample".into()));
        }
        validate_output_times(self.t_end, &self.output_times)
    }

    /// Bytes needed to hold every output field in memory.
    pub fn field_bytes(&self) -> u64 {
        (self.samples * self.output_times.len() * self.grid.len() * 16) as u64
    }

    /// Configuration text that determines the ensemble's contents.
    pub fn identity(&self) -> String {
        ensemble_lines(self).join("\n")
    }

    fn same_identity(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldHandle {
    Memory(VectorField),
    File(PathBuf),
}

impl FieldHandle {
    pub fn load(&self) -> Result<VectorField> {
        match self {
            FieldHandle::Memory(f) => Ok(f.clone()),
            FieldHandle::File(p) => Ok(read_field(p)?.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    /// `fields[m][k]`: sample `m` at output time `k`.
    pub fields: Vec<Vec<FieldHandle>>,
    /// Per-sample step history (energy, dt, Picard iterations).
    pub diagnostics: Vec<Vec<StepRecord>>,
}

impl EnsembleResult {
    pub fn samples(&self) -> usize {
        self.fields.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.config.output_times
    }

    pub fn field(&self, m: usize, k: usize) -> Result<VectorField> {
        self.fields[m][k].load()
    }

    /// All samples at output index `k`, in sample order.
    pub fn fields_at(&self, k: usize) -> Result<Vec<VectorField>> {
        if k >= self.times().len() {
            return Err(Error::InvalidParameter(format!("output index {k} out of range")));
        }
        self.fields.iter().map(|s| s[k].load()).collect()
    }

    /// Index of an output time, matching to within `1e-12`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times()
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * s.abs().max(1.0))
            .ok_or_else(|| {
                Error::InvalidParameter(format!("t = {t} is not a stored output time (have {:?})", self.times()))
            })
    }

    /// Energy of sample `m` after every step.
    pub fn energies(&self, m: usize) -> Vec<f64> {
        self.diagnostics[m].iter().map(|r| r.energy).collect()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))
}

type SampleOutput = (Vec<VectorField>, Vec<StepRecord>);

fn simulate(cfg: &EnsembleConfig, solver: &PoissonSolver, m: usize) -> Result<SampleOutput> {
    let init = sample_initial(&cfg.data, cfg.seed, m as u64, solver)?;
    let traj = evolve(&init, cfg.t_end, &cfg.output_times, &cfg.scheme, solver)?;
    info!("sample {m} done in {} steps", traj.steps.len() - 1);
    Ok((traj.outputs.into_iter().map(|s| s.field).collect(), traj.steps))
}

/// Runs `f` for every sample index on the configured pool. Failures are
/// collected rather than dropping samples; an I/O failure takes precedence
/// so it keeps its exit class.
fn for_samples<T: Send>(
    cfg: &EnsembleConfig,
    indices: &[usize],
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = pool(cfg.workers)?.install(|| indices.par_iter().map(|&m| f(m)).collect());
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut io_error = None;
    for (&m, r) in indices.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) if e.kind() == ErrorKind::Io && io_error.is_none() => io_error = Some(e),
            Err(e) => failures.push((m, e.to_string())),
        }
    }
    if let Some(e) = io_error {
        return Err(e);
    }
    if !failures.is_empty() {
        return Err(Error::SampleFailures(failures));
    }
    Ok(ok)
}

/// Runs the whole ensemble in memory.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    if cfg.field_bytes() > cfg.memory_budget {
        return Err(Error::Config(format!(
            "ensemble needs {} bytes of field storage, over the {} byte memory budget; run it in a directory",
            cfg.field_bytes(),
            cfg.memory_budget
        )));
    }
    let solver = PoissonSolver::new(cfg.grid)?;
    let indices: Vec<usize> = (0..cfg.samples).collect();
    let outputs = for_samples(cfg, &indices, |m| simulate(cfg, &solver, m))?;
    let (fields, diagnostics) = outputs
        .into_iter()
        .map(|(f, d)| (f.into_iter().map(FieldHandle::Memory).collect(), d))
        .unzip();
    Ok(EnsembleResult {
        config: cfg.clone(),
        fields,
        diagnostics,
    })
}

pub fn field_path(m: usize, k: usize) -> PathBuf {
    Path::new("fields").join(format!("s{m}_t{k}.fld"))
}

pub fn diag_path(m: usize) -> PathBuf {
    Path::new("diag").join(format!("s{m}.csv"))
}

fn tmp_name(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".tmp");
    PathBuf::from(s)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_name(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_field_atomic(path: &Path, field: &VectorField, time: f64) -> Result<()> {
    let tmp = tmp_name(path);
    write_field(&tmp, field, time)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn manifest_text(cfg: &EnsembleConfig) -> String {
    let mut s = format!("# euler-stat run\nformat = {MANIFEST_FORMAT}\n");
    for line in ensemble_lines(cfg) {
        s.push_str(&line);
        s.push('\n');
    }
    s.push_str("[files]\n");
    for m in 0..cfg.samples {
        for k in 0..cfg.output_times.len() {
            s.push_str(&format!("{m} {k} {}\n", field_path(m, k).display()));
        }
    }
    s
}

/// `(sample, output index, relative path)` row of a manifest's `[files]` table.
pub type ManifestEntry = (usize, usize, PathBuf);

/// Reads a manifest: the configuration and its `[files]` table.
pub fn read_manifest(dir: &Path) -> Result<(EnsembleConfig, Vec<ManifestEntry>)> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |reason: String| Error::format(&path, reason);
    let (head, table) = text
        .split_once("[files]\n")
        .ok_or_else(|| bad("missing [files] section".into()))?;
    let mut body = String::new();
    for line in head.lines() {
        match line.split_once('=') {
            Some((k, v)) if k.trim() == "format" => {
                if v.trim() != MANIFEST_FORMAT.to_string() {
                    return Err(bad(format!("unsupported manifest format {}", v.trim())));
                }
            }
            _ => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let cfg = ensemble_from_text(&body).map_err(|e| bad(e.to_string()))?;
    let mut files = Vec::new();
    for line in table.lines().filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let parsed = (|| {
            let m = it.next()?.parse().ok()?;
            let k = it.next()?.parse().ok()?;
            let p = PathBuf::from(it.next()?);
            it.next().is_none().then_some((m, k, p))
        })();
        files.push(parsed.ok_or_else(|| bad(format!("bad file table line `{line}`")))?);
    }
    let expected = cfg.samples * cfg.output_times.len();
    if files.len() != expected {
        return Err(bad(format!("file table lists {} fields, expected {expected}", files.len())));
    }
    for (i, (m, k, p)) in files.iter().enumerate() {
        let t = cfg.output_times.len();
        if (*m, *k) != (i / t, i % t) || *p != field_path(*m, *k) {
            return Err(bad(format!("unexpected file table entry {m} {k} {}", p.display())));
        }
    }
    Ok((cfg, files))
}

/// Exclusive ownership of a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        let mut f = fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::io(
                        &path,
                        std::io::Error::new(e.kind(), "run directory is locked by another process (remove the lock if it is stale)"),
                    )
                } else {
                    Error::io(&path, e)
                }
            })?;
        writeln!(f, "{}", std::process::id()).map_err(|e| Error::io(&path, e))?;
        Ok(Self { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn sample_complete(dir: &Path, cfg: &EnsembleConfig, m: usize) -> bool {
    dir.join(diag_path(m)).is_file() && (0..cfg.output_times.len()).all(|k| dir.join(field_path(m, k)).is_file())
}

fn persist_sample(dir: &Path, cfg: &EnsembleConfig, m: usize, out: &SampleOutput) -> Result<()> {
    for (k, (field, &t)) in out.0.iter().zip(&cfg.output_times).enumerate() {
        write_field_atomic(&dir.join(field_path(m, k)), field, t)?;
    }
    let mut csv = Vec::new();
    write_step_csv(&mut csv, &out.1).map_err(|e| Error::io(dir.join(diag_path(m)), e))?;
    write_atomic(&dir.join(diag_path(m)), &csv)
}

fn prepare_dir(dir: &Path, cfg: &EnsembleConfig) -> Result<()> {
    for sub in ["fields", "diag"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    write_atomic(&dir.join(MANIFEST), manifest_text(cfg).as_bytes())
}

/// Runs the ensemble into `dir`, resuming if the directory already holds a
/// run with the same configuration.
pub fn run_in_dir(cfg: &EnsembleConfig, dir: &Path) -> Result<EnsembleResult> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let _lock = RunLock::acquire(dir)?;
    if dir.join(MANIFEST).exists() {
        check_resumable(dir, cfg)?;
    }
    prepare_dir(dir, cfg)?;
    let missing: Vec<usize> = (0..cfg.samples).filter(|&m| !sample_complete(dir, cfg, m)).collect();
    if missing.is_empty() {
        info!("{}: all {} samples present", dir.display(), cfg.samples);
    } else {
        info!("{}: computing {} of {} samples", dir.display(), missing.len(), cfg.samples);
        let solver = PoissonSolver::new(cfg.grid)?;
        for_samples(cfg, &missing, |m| {
            let out = simulate(cfg, &solver, m)?;
            persist_sample(dir, cfg, m, &out)
        })?;
    }
    load_with_budget(dir, cfg.memory_budget)
}

fn check_resumable(dir: &Path, cfg: &EnsembleConfig) -> Result<()> {
    let (stored, _) = read_manifest(dir)?;
    if !stored.same_identity(cfg) {
        return Err(Error::Config(format!(
            "{} holds a different ensemble; refusing to mix runs\nstored:\n{}\nrequested:\n{}",
            dir.display(),
            stored.identity(),
            cfg.identity()
        )));
    }
    Ok(())
}

/// Completes a partial run directory; the configuration must match its manifest.
pub fn resume(dir: &Path, cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    if !dir.join(MANIFEST).exists() {
        return Err(Error::Config(format!("{} has no manifest to resume", dir.display())));
    }
    run_in_dir(cfg, dir)
}

/// Writes a complete result to `dir` (fresh or holding the same ensemble).
pub fn save_ensemble(r: &EnsembleResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let _lock = RunLock::acquire(dir)?;
    if dir.join(MANIFEST).exists() {
        check_resumable(dir, &r.config)?;
    }
    prepare_dir(dir, &r.config)?;
    for m in 0..r.samples() {
        let fields = (0..r.times().len()).map(|k| r.field(m, k)).collect::<Result<Vec<_>>>()?;
        persist_sample(dir, &r.config, m, &(fields, r.diagnostics[m].clone()))?;
    }
    Ok(())
}

pub fn load_ensemble(dir: &Path) -> Result<EnsembleResult> {
    load_with_budget(dir, DEFAULT_MEMORY_BUDGET)
}

/// Every listed file that is absent.
pub fn missing_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let (cfg, files) = read_manifest(dir)?;
    let mut missing: Vec<PathBuf> = files
        .into_iter()
        .map(|(_, _, p)| p)
        .filter(|p| !dir.join(p).is_file())
        .collect();
    missing.extend((0..cfg.samples).map(diag_path).filter(|p| !dir.join(p).is_file()));
    Ok(missing)
}

fn read_diag(path: &Path) -> Result<Vec<StepRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(STEP_CSV_HEADER) {
        return Err(Error::format(path, "missing diagnostics header"));
    }
    lines
        .map(|l| StepRecord::parse_csv_row(l).ok_or_else(|| Error::format(path, format!("bad row `{l}`"))))
        .collect()
}

/// Energy must not grow by more than [`ENERGY_TOL`] (relative to the
/// initial energy) from one step to the next.
pub fn check_energy(records: &[StepRecord]) -> Result<()> {
    let scale = records.first().map_or(1.0, |r| r.energy.max(1.0));
    for w in records.windows(2) {
        if w[1].energy > w[0].energy + ENERGY_TOL * scale {
            return Err(Error::Invariant(format!(
                "energy grew from {} to {} at step {}",
                w[0].energy, w[1].energy, w[1].step
            )));
        }
    }
    Ok(())
}

/// Loads and verifies a complete run. Fields stay in memory when they fit
/// the budget and are otherwise re-read on demand.
pub fn load_with_budget(dir: &Path, budget: u64) -> Result<EnsembleResult> {
    let (mut cfg, _) = read_manifest(dir)?;
    cfg.memory_budget = budget;
    let missing = missing_entries(dir)?;
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        return Err(Error::format(
            dir,
            format!("incomplete run, {} missing entries: {}", missing.len(), list.join(", ")),
        ));
    }
    let in_memory = cfg.field_bytes() <= budget;
    let mut fields = Vec::with_capacity(cfg.samples);
    let mut diagnostics = Vec::with_capacity(cfg.samples);
    for m in 0..cfg.samples {
        let mut row = Vec::with_capacity(cfg.output_times.len());
        for (k, &t) in cfg.output_times.iter().enumerate() {
            let path = dir.join(field_path(m, k));
            let (field, time) = read_field(&path)?;
            if field.grid() != cfg.grid {
                return Err(Error::format(&path, format!("grid {} does not match the manifest", field.grid())));
            }
            if time != t {
                return Err(Error::format(&path, format!("stored time {time} does not match output time {t}")));
            }
            check_divergence_free(&field, DIVERGENCE_TOL)
                .map_err(|e| Error::Invariant(format!("{}: {e}", path.display())))?;
            row.push(if in_memory {
                FieldHandle::Memory(field)
            } else {
                FieldHandle::File(path)
            });
        }
        let diag = read_diag(&dir.join(diag_path(m)))?;
        check_energy(&diag)?;
        fields.push(row);
        diagnostics.push(diag);
    }
    Ok(EnsembleResult {
        config: cfg,
        fields,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init_data::{FbmSpec, ShearLayerSpec};

    fn fbm_cfg(n: usize, m: usize) -> EnsembleConfig {
        let mut c = EnsembleConfig::new(GridSpec::square(n).unwrap(), InitialDataSpec::Fbm(FbmSpec::default()), 0.02);
        c.samples = m;
        c.output_times = vec![0.0, 0.01, 0.02];
        c.seed = 3;
        c
    }

    #[test]
    fn steady_single_sample() {
        let spec = ShearLayerSpec {
            gamma: 0.0,
            ..Default::default()
        };
        let mut c = EnsembleConfig::new(GridSpec::square(16).unwrap(), InitialDataSpec::ShearLayer(spec), 0.1);
        c.samples = 1;
        c.scheme.epsilon = 0.0;
        c.output_times = vec![0.0, 0.05, 0.1];
        let r = run_ensemble(&c).unwrap();
        let f0 = r.field(0, 0).unwrap();
        for k in 1..3 {
            assert!(r.field(0, k).unwrap().sub(&f0).max_speed() < 1e-12);
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let mut a = fbm_cfg(16, 4);
        a.workers = 1;
        let mut b = a.clone();
        b.workers = 4;
        let (ra, rb) = (run_ensemble(&a).unwrap(), run_ensemble(&b).unwrap());
        assert_eq!(ra.fields, rb.fields);
    }

    #[test]
    fn save_load_round_trip() {
        let c = fbm_cfg(16, 3);
        let r = run_ensemble(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_ensemble(&r, dir.path()).unwrap();
        assert!(!dir.path().join(LOCK_FILE).exists());
        let back = load_ensemble(dir.path()).unwrap();
        assert_eq!(back.fields, r.fields);
        for m in 0..3 {
            assert_eq!(back.energies(m), r.energies(m));
        }
        let (_, files) = read_manifest(dir.path()).unwrap();
        assert_eq!(files.len(), 9);
        // File-backed handles give the same fields.
        let lazy = load_with_budget(dir.path(), 0).unwrap();
        assert!(matches!(lazy.fields[0][0], FieldHandle::File(_)));
        assert_eq!(lazy.fields_at(2).unwrap(), back.fields_at(2).unwrap());
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let c = fbm_cfg(16, 4);
        let full = run_ensemble(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run_in_dir(&c, dir.path()).unwrap();
        // Knock out two samples and finish them again.
        fs::remove_file(dir.path().join(field_path(1, 2))).unwrap();
        fs::remove_file(dir.path().join(diag_path(3))).unwrap();
        assert_eq!(missing_entries(dir.path()).unwrap().len(), 2);
        assert!(load_ensemble(dir.path()).is_err());
        let resumed = resume(dir.path(), &c).unwrap();
        assert_eq!(resumed.fields, full.fields);
        // Complete run: no-op.
        let again = resume(dir.path(), &c).unwrap();
        assert_eq!(again.fields, full.fields);
        let mut other = c.clone();
        other.seed += 1;
        assert_eq!(resume(dir.path(), &other).unwrap_err().kind(), ErrorKind::Usage);
        // The worker count is not part of the identity.
        let mut w = c.clone();
        w.workers = 2;
        assert!(resume(dir.path(), &w).is_ok());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        let e = run_in_dir(&fbm_cfg(16, 1), dir.path()).unwrap_err();
        assert_eq!(e.kind(), ErrorKind::Io);
        drop(lock);
        assert!(run_in_dir(&fbm_cfg(16, 1), dir.path()).is_ok());
    }

    #[test]
    fn corrupt_field_is_rejected() {
        let c = fbm_cfg(16, 1);
        let dir = tempfile::tempdir().unwrap();
        run_in_dir(&c, dir.path()).unwrap();
        let p = dir.path().join(field_path(0, 1));
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] = b'X';
        fs::write(&p, bytes).unwrap();
        assert_eq!(load_ensemble(dir.path()).unwrap_err().kind(), ErrorKind::Io);
    }

    #[test]
    fn energy_check() {
        let rec = |step, energy| StepRecord {
            step,
            time: 0.0,
            dt: 0.0,
            energy,
            picard_iters: 0,
            divergence: 0.0,
            jump_cubed: 0.0,
        };
        assert!(check_energy(&[rec(0, 1.0), rec(1, 1.0), rec(2, 0.5)]).is_ok());
        assert!(check_energy(&[rec(0, 1.0), rec(1, 1.0 + 1e-9)]).is_err());
    }

    #[test]
    fn budget_and_validation() {
        let mut c = fbm_cfg(16, 2);
        c.memory_budget = 10;
        assert_eq!(run_ensemble(&c).unwrap_err().kind(), ErrorKind::Usage);
        c.memory_budget = DEFAULT_MEMORY_BUDGET;
        c.samples = 0;
        assert!(run_ensemble(&c).is_err());
    }
}
