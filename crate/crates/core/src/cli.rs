//! The `euler-stat` command line.
//!
//! Every output CSV starts with `#` comment lines echoing the resolved
//! configuration. Paths and worker counts are not echoed, so identical
//! experiments give byte-identical files.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ensemble_lines, ExperimentConfig, KvDoc};
use crate::ensemble::{load_ensemble, read_manifest, run_in_dir, EnsembleConfig, EnsembleResult};
use crate::error::{Error, ErrorKind, Result};
use crate::init_data::InitialDataSpec;
use crate::mesh::VectorField;
use crate::stats::{
    cauchy_rate_moments, ensemble_field_rate, fit_slope, moments, restrict_ensemble, structure_function, subsample,
    wasserstein_marginal,
};

pub const WORKERS_ENV: &str = "EULER_STAT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "euler-stat", version, about = "Statistical solutions of the 2D incompressible Euler equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Options {
    /// Experiment configuration file (key = value)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory (run, gamma-study) or directory for CSV output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override the ensemble seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to the config, then EULER_STAT_WORKERS)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Largest structure-function radius in cells
    #[arg(long = "l-max", global = true)]
    pub l_max: Option<usize>,
    /// Structure-function exponent
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Marginal orders for Wasserstein distances, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Number of spatial tuples per Wasserstein estimate
    #[arg(long, global = true)]
    pub tuples: Option<usize>,
    /// Output times to simulate (run) or to analyse (other commands)
    #[arg(long, global = true, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run (or resume) an ensemble into a directory
    Run,
    /// Moments, structure functions and slopes of a stored run
    Stats { run: PathBuf },
    /// Structure-function slopes only
    Slope { run: PathBuf },
    /// W1 distances of k-point marginals between two runs
    Wasserstein { a: PathBuf, b: PathBuf },
    /// Cauchy rates across runs at successive resolutions
    Cauchy {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
    },
    /// W1 against a reference perturbation and the unperturbed datum
    GammaStudy,
    /// Re-check the invariants of a stored run
    Verify { run: PathBuf },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Io => 3,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let o = &cli.opts;
    match &cli.command {
        Command::Run => {
            let cfg = experiment_config(o, None)?;
            let dir = o.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let r = run_in_dir(&cfg.ensemble, &dir)?;
            println!("{}: {} samples x {} output times", dir.display(), r.samples(), r.times().len());
            Ok(())
        }
        Command::Stats { run } => cmd_stats(o, run, true),
        Command::Slope { run } => cmd_stats(o, run, false),
        Command::Wasserstein { a, b } => cmd_wasserstein(o, a, b),
        Command::Cauchy { runs } => cmd_cauchy(o, runs),
        Command::GammaStudy => cmd_gamma_study(o),
        Command::Verify { run } => cmd_verify(run),
    }
}

fn resolve_workers(o: &Options, doc: &KvDoc) -> Result<Option<String>> {
    if let Some(w) = o.workers {
        return Ok(Some(w.to_string()));
    }
    if doc.contains("ensemble.workers") {
        return Ok(None);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            v.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("{WORKERS_ENV}={v}: {e}")))?;
            Ok(Some(v.trim().to_string()))
        }
        Err(_) => Ok(None),
    }
}

const ENSEMBLE_PREFIXES: &[&str] = &["grid.", "data.", "scheme.", "time.", "ensemble.samples", "ensemble.seed"];

/// Builds the configuration from `--config`, the manifest of `run` (for
/// analysis commands) and the command-line overrides.
fn experiment_config(o: &Options, run: Option<&Path>) -> Result<ExperimentConfig> {
    let mut doc = match &o.config {
        Some(p) => KvDoc::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => KvDoc::default(),
    };
    if let Some(w) = resolve_workers(o, &doc)? {
        doc.set("ensemble.workers", w);
    }
    match run {
        Some(dir) => {
            if o.seed.is_some() {
                return Err(Error::Config("--seed only applies to run and gamma-study".into()));
            }
            let (stored, _) = read_manifest(dir)?;
            let stale: Vec<String> = doc
                .keys()
                .filter(|k| ENSEMBLE_PREFIXES.iter().any(|p| k.starts_with(p)))
                .map(str::to_string)
                .collect();
            for k in stale {
                doc.remove(&k);
            }
            for line in ensemble_lines(&stored) {
                let (k, v) = line.split_once(" = ").expect("ensemble lines are key = value");
                doc.set(k, v);
            }
        }
        None => {
            if let Some(s) = o.seed {
                doc.set("ensemble.seed", s.to_string());
            }
            if let Some(t) = &o.times {
                doc.set("time.outputs", join(t));
            }
        }
    }
    if let Some(l) = o.l_max {
        doc.set("stats.l_max", l.to_string());
    }
    if let Some(p) = o.p {
        doc.set("stats.p", p.to_string());
    }
    if let Some(k) = &o.k {
        doc.set("wasserstein.k", join(k));
    }
    if let Some(q) = o.tuples {
        doc.set("wasserstein.tuples", q.to_string());
    }
    ExperimentConfig::from_doc(&doc)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Output indices selected by `--times` (all stored times by default).
fn selected_times(o: &Options, r: &EnsembleResult) -> Result<Vec<usize>> {
    match &o.times {
        None => Ok((0..r.times().len()).collect()),
        Some(ts) => ts.iter().map(|&t| r.time_index(t)).collect(),
    }
}

fn header(command: &str, lines: &[String]) -> String {
    let mut s = format!("# euler-stat {command}\n");
    for l in lines {
        let _ = writeln!(s, "# {l}");
    }
    s
}

fn write_csv(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_stats(o: &Options, run: &Path, full: bool) -> Result<()> {
    let cfg = experiment_config(o, Some(run))?;
    let r = load_ensemble(run)?;
    let out = o.out.clone().unwrap_or_else(|| run.join("stats"));
    let head = header(if full { "stats" } else { "slope" }, &cfg.resolved_lines());
    let s = cfg.stats;

    let mut mom = head.clone() + "t,i1,i2,mean_u,mean_v,var_u,var_v\n";
    let mut sf = head.clone() + "t,l,r,S\n";
    let mut slopes = head + "t,p,slope,fit_lo,fit_hi\n";
    for k in selected_times(o, &r)? {
        let t = r.times()[k];
        let fields = r.fields_at(k)?;
        let curve = structure_function(&fields, s.p, s.l_max, t)?;
        let fit = fit_slope(&curve, Some(s.fit))?;
        let _ = writeln!(slopes, "{t},{},{},{},{}", s.p, fit.slope, fit.l_lo, fit.l_hi);
        if !full {
            continue;
        }
        for ((l, r), v) in curve.radii.iter().zip(&curve.r).zip(&curve.values) {
            let _ = writeln!(sf, "{t},{l},{r},{v}");
        }
        let m = moments(&fields)?;
        let g = m.mean.grid();
        for i1 in 0..g.n1() {
            for i2 in 0..g.n2() {
                let i = g.index(i1, i2);
                let (mu, var) = (m.mean.at(i), m.variance.at(i));
                let _ = writeln!(mom, "{t},{i1},{i2},{},{},{},{}", mu[0], mu[1], var[0], var[1]);
            }
        }
    }
    if full {
        write_csv(&out.join("moments.csv"), &mom)?;
        write_csv(&out.join("structure.csv"), &sf)?;
    }
    write_csv(&out.join("slopes.csv"), &slopes)
}

/// Brings two ensembles at one time onto the coarser grid and a common
/// sample count (seeded subsampling of the larger one).
fn comparable(a: Vec<VectorField>, b: Vec<VectorField>, seed: u64) -> Result<(Vec<VectorField>, Vec<VectorField>)> {
    let (na, nb) = (a[0].grid().n1(), b[0].grid().n1());
    let reduce = |f: Vec<VectorField>, from: usize, to: usize| -> Result<Vec<VectorField>> {
        if from == to {
            return Ok(f);
        }
        if !from.is_multiple_of(to) {
            return Err(Error::GridMismatch {
                left: format!("{from}"),
                right: format!("{to}"),
            });
        }
        restrict_ensemble(&f, from / to)
    };
    let n = na.min(nb);
    let (mut a, mut b) = (reduce(a, na, n)?, reduce(b, nb, n)?);
    a[0].grid().require_same(&b[0].grid())?;
    let m = a.len().min(b.len());
    if a.len() > m {
        a = subsample(&a, m, seed)?;
    }
    if b.len() > m {
        b = subsample(&b, m, seed)?;
    }
    Ok((a, b))
}

fn cmd_wasserstein(o: &Options, a: &Path, b: &Path) -> Result<()> {
    let cfg = experiment_config(o, Some(a))?;
    let (ra, rb) = (load_ensemble(a)?, load_ensemble(b)?);
    let w = &cfg.wasserstein;
    let mut lines = cfg.resolved_lines();
    lines.push(format!("other = {}", ensemble_lines(&rb.config).join("; ")));
    let mut csv = header("wasserstein", &lines) + "k,t,Q,value\n";
    for ka in selected_times(o, &ra)? {
        let t = ra.times()[ka];
        let kb = rb.time_index(t)?;
        let (fa, fb) = comparable(ra.fields_at(ka)?, rb.fields_at(kb)?, w.tuple_seed)?;
        for &k in &w.ks {
            let est = wasserstein_marginal(&fa, &fb, k, w.tuples, w.tuple_seed, t)?;
            let _ = writeln!(csv, "{k},{t},{},{}", est.num_tuples, est.value);
        }
    }
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("."));
    write_csv(&out.join("wasserstein.csv"), &csv)
}

/// Identity lines with resolution and sample count removed.
fn family(cfg: &EnsembleConfig) -> Vec<String> {
    ensemble_lines(cfg)
        .into_iter()
        .filter(|l| !l.starts_with("grid.") && !l.starts_with("ensemble.samples"))
        .collect()
}

fn cmd_cauchy(o: &Options, runs: &[PathBuf]) -> Result<()> {
    let mut loaded = runs
        .iter()
        .map(|d| Ok((d.as_path(), load_ensemble(d)?)))
        .collect::<Result<Vec<_>>>()?;
    loaded.sort_by_key(|(_, r)| r.config.grid.n1());
    let base = family(&loaded[0].1.config);
    for (_, r) in &loaded[1..] {
        if family(&r.config) != base {
            return Err(Error::Config(
                "cauchy runs must share every setting except the resolution and sample count".into(),
            ));
        }
    }
    for w in loaded.windows(2) {
        let (c, f) = (w[0].1.config.grid, w[1].1.config.grid);
        if f.n1() != 2 * c.n1() || f.n2() != 2 * c.n2() {
            return Err(Error::GridMismatch {
                left: f.to_string(),
                right: format!("2 x {c}"),
            });
        }
    }
    // Stats options resolve against the coarsest run.
    let cfg = experiment_config(o, Some(loaded[0].0))?;
    let loaded: Vec<EnsembleResult> = loaded.into_iter().map(|(_, r)| r).collect();
    let w = &cfg.wasserstein;
    let mut lines = cfg.resolved_lines();
    lines.push(format!(
        "resolutions = {}",
        join(&loaded.iter().map(|r| r.config.grid.to_string()).collect::<Vec<_>>())
    ));
    lines.push(format!(
        "samples = {}",
        join(&loaded.iter().map(|r| r.samples()).collect::<Vec<_>>())
    ));
    let mut csv = header("cauchy", &lines) + "quantity,N,t,value\n";
    for pair in loaded.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        let n = coarse.config.grid.n1();
        for kc in selected_times(o, coarse)? {
            let t = coarse.times()[kc];
            let kf = fine.time_index(t)?;
            let (fc, ff) = (coarse.fields_at(kc)?, fine.fields_at(kf)?);
            let m = fc.len().min(ff.len());
            let field = ensemble_field_rate(&ff[..m], &fc[..m])?;
            let mr = cauchy_rate_moments(&moments(&ff)?, &moments(&fc)?)?;
            let _ = writeln!(csv, "field,{n},{t},{field}");
            let _ = writeln!(csv, "mean,{n},{t},{}", mr.mean);
            let _ = writeln!(csv, "variance,{n},{t},{}", mr.variance);
            let (a, b) = comparable(ff, fc, w.tuple_seed)?;
            for &k in &w.ks {
                let est = wasserstein_marginal(&a, &b, k, w.tuples, w.tuple_seed, t)?;
                let _ = writeln!(csv, "w1_k{k},{n},{t},{}", est.value);
            }
        }
    }
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("."));
    write_csv(&out.join("cauchy.csv"), &csv)
}

fn with_gamma(cfg: &EnsembleConfig, gamma: f64) -> Result<EnsembleConfig> {
    let InitialDataSpec::ShearLayer(mut s) = cfg.data else {
        return Err(Error::Config("gamma-study needs data.kind = shear".into()));
    };
    s.gamma = gamma;
    Ok(EnsembleConfig {
        data: InitialDataSpec::ShearLayer(s),
        ..cfg.clone()
    })
}

fn cmd_gamma_study(o: &Options) -> Result<()> {
    let cfg = experiment_config(o, None)?;
    let gs = &cfg.gamma_study;
    if gs.gammas.is_empty() {
        return Err(Error::Config("gamma_study.gammas is empty".into()));
    }
    let out = o.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let w = &cfg.wasserstein;

    let run_gamma = |g: f64| -> Result<EnsembleResult> {
        run_in_dir(&with_gamma(&cfg.ensemble, g)?, &out.join(format!("gamma_{g}")))
    };
    let reference = run_gamma(gs.reference)?;
    // The unperturbed datum is deterministic: one trajectory, repeated M times.
    let mut atom_cfg = with_gamma(&cfg.ensemble, 0.0)?;
    atom_cfg.samples = 1;
    let atom = run_in_dir(&atom_cfg, &out.join("unperturbed"))?;

    let mut csv = header("gamma-study", &cfg.resolved_lines()) + "gamma,t,w1_ref,w1_atom\n";
    for &g in &gs.gammas {
        let r = if g == gs.reference { reference.clone() } else { run_gamma(g)? };
        for k in 0..r.times().len() {
            let t = r.times()[k];
            let fields = r.fields_at(k)?;
            let atoms = vec![atom.field(0, k)?; fields.len()];
            let to_ref = wasserstein_marginal(&fields, &reference.fields_at(k)?, 1, w.tuples, w.tuple_seed, t)?;
            let to_atom = wasserstein_marginal(&fields, &atoms, 1, w.tuples, w.tuple_seed, t)?;
            let _ = writeln!(csv, "{g},{t},{},{}", to_ref.value, to_atom.value);
        }
    }
    write_csv(&out.join("gamma_study.csv"), &csv)
}

fn cmd_verify(run: &Path) -> Result<()> {
    // Loading re-reads every field and checks format, count, grid, stored
    // times, discrete divergence and per-sample energy monotonicity.
    let r = load_ensemble(run)?;
    let steps: usize = r.diagnostics.iter().map(|d| d.len() - 1).sum();
    let max_picard = r
        .diagnostics
        .iter()
        .flatten()
        .map(|s| s.picard_iters)
        .max()
        .unwrap_or(0);
    if max_picard > r.config.scheme.picard_max_iters {
        return Err(Error::Invariant(format!(
            "recorded {max_picard} Picard iterations, above the limit {}",
            r.config.scheme.picard_max_iters
        )));
    }
    println!(
        "{}: ok ({} samples x {} times, {steps} steps, max {max_picard} Picard iterations)",
        run.display(),
        r.samples(),
        r.times().len()
    );
    Ok(())
}
