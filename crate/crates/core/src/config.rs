//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # comment
//! grid.n = 64
//! data.kind = shear        # shear | fbm
//! data.rho = 0
//! time.t_end = 0.4
//! time.outputs = 0, 0.4
//! ```
//!
//! Unknown keys, duplicate keys and keys that do not apply to the chosen
//! `data.kind` are rejected. After resolution every default is explicit and
//! [`ExperimentConfig::resolved_lines`] echoes the complete configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ensemble::{EnsembleConfig, DEFAULT_MEMORY_BUDGET};
use crate::error::{Error, Result};
use crate::init_data::{FbmSpec, InitialDataSpec, ShearLayerSpec};
use crate::mesh::GridSpec;
use crate::scheme::SchemeParams;
use crate::stats::{default_fit_range, default_l_max};

pub const KNOWN_KEYS: &[&str] = &[
    "grid.n",
    "grid.n1",
    "grid.n2",
    "data.kind",
    "data.rho",
    "data.gamma",
    "data.modes",
    "data.hurst",
    "data.amplitude",
    "scheme.theta",
    "scheme.epsilon",
    "scheme.cfl",
    "scheme.picard_tol",
    "scheme.picard_max_iters",
    "scheme.dt_floor",
    "ensemble.samples",
    "ensemble.seed",
    "ensemble.workers",
    "ensemble.memory_budget",
    "time.t_end",
    "time.outputs",
    "stats.p",
    "stats.l_max",
    "stats.fit_lo",
    "stats.fit_hi",
    "wasserstein.k",
    "wasserstein.tuples",
    "wasserstein.tuple_seed",
    "gamma_study.gammas",
    "gamma_study.reference",
    "output.dir",
];

/// Parsed `key = value` pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: BTreeMap<String, (String, usize)>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            if let Some((_, first)) = doc.entries.get(k) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{k}` (first set on line {first})",
                    no + 1
                )));
            }
            doc.entries.insert(k.to_string(), (v.to_string(), no + 1));
        }
        Ok(doc)
    }

    /// Sets or replaces a value (command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("`{key} = {v}`: {e}"))),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (k, (_, line)) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                let at = if *line > 0 { format!("line {line}: ") } else { String::new() };
                return Err(Error::Config(format!("{at}unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse().map_err(|e| Error::Config(format!("`{key}` entry `{s}`: {e}")))
        })
        .collect()
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Structure-function options with the grid-dependent defaults filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsOptions {
    pub p: f64,
    pub l_max: usize,
    pub fit: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinOptions {
    pub ks: Vec<usize>,
    pub tuples: usize,
    pub tuple_seed: u64,
}

impl Default for WassersteinOptions {
    fn default() -> Self {
        Self {
            ks: vec![1],
            tuples: 100,
            tuple_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaStudyOptions {
    pub gammas: Vec<f64>,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleConfig,
    pub stats: StatsOptions,
    pub wasserstein: WassersteinOptions,
    pub gamma_study: GammaStudyOptions,
    pub output_dir: PathBuf,
}

fn ensemble_from_doc(doc: &KvDoc) -> Result<EnsembleConfig> {
    let n: Option<usize> = doc.get("grid.n")?;
    if n.is_some() && (doc.contains("grid.n1") || doc.contains("grid.n2")) {
        return Err(Error::Config("set either grid.n or grid.n1/grid.n2, not both".into()));
    }
    let (n1, n2) = match n {
        Some(n) => (n, n),
        None => (doc.get_or("grid.n1", 64)?, doc.get_or("grid.n2", 64)?),
    };
    let grid = GridSpec::new(n1, n2)?;

    let kind = doc.raw("data.kind").unwrap_or("shear");
    let (data, foreign): (InitialDataSpec, &[&str]) = match kind {
        "shear" => {
            let d = ShearLayerSpec::default();
            (
                InitialDataSpec::ShearLayer(ShearLayerSpec {
                    rho: doc.get_or("data.rho", d.rho)?,
                    gamma: doc.get_or("data.gamma", d.gamma)?,
                    modes: doc.get_or("data.modes", d.modes)?,
                }),
                &["data.hurst", "data.amplitude"],
            )
        }
        "fbm" => {
            let d = FbmSpec::default();
            (
                InitialDataSpec::Fbm(FbmSpec {
                    hurst: doc.get_or("data.hurst", d.hurst)?,
                    amplitude: doc.get_or("data.amplitude", d.amplitude)?,
                }),
                &["data.rho", "data.gamma", "data.modes"],
            )
        }
        other => return Err(Error::Config(format!("data.kind must be `shear` or `fbm`, got `{other}`"))),
    };
    if let Some(k) = foreign.iter().find(|k| doc.contains(k)) {
        return Err(Error::Config(format!("`{k}` does not apply to data.kind = {kind}")));
    }

    let d = SchemeParams::default();
    let scheme = SchemeParams {
        theta: doc.get_or("scheme.theta", d.theta)?,
        epsilon: doc.get_or("scheme.epsilon", d.epsilon)?,
        cfl: doc.get_or("scheme.cfl", d.cfl)?,
        picard_tol: doc.get_or("scheme.picard_tol", d.picard_tol)?,
        picard_max_iters: doc.get_or("scheme.picard_max_iters", d.picard_max_iters)?,
        dt_floor: doc.get_or("scheme.dt_floor", d.dt_floor)?,
    };
    let t_end: f64 = doc.get_or("time.t_end", 0.0)?;
    let output_times = match doc.get_list("time.outputs")? {
        Some(t) => t,
        None if t_end > 0.0 => vec![0.0, t_end],
        None => vec![0.0],
    };
    let cfg = EnsembleConfig {
        grid,
        data,
        scheme,
        samples: doc.get_or("ensemble.samples", n1)?,
        t_end,
        output_times,
        seed: doc.get_or("ensemble.seed", 0)?,
        workers: doc.get_or("ensemble.workers", 0)?,
        memory_budget: doc.get_or("ensemble.memory_budget", DEFAULT_MEMORY_BUDGET)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Identity-relevant `key = value` lines of an ensemble configuration.
/// Worker count and memory budget do not affect results and are omitted.
pub fn ensemble_lines(c: &EnsembleConfig) -> Vec<String> {
    let mut out = vec![
        format!("grid.n1 = {}", c.grid.n1()),
        format!("grid.n2 = {}", c.grid.n2()),
    ];
    match c.data {
        InitialDataSpec::ShearLayer(s) => {
            out.push("data.kind = shear".into());
            out.push(format!("data.rho = {}", s.rho));
            out.push(format!("data.gamma = {}", s.gamma));
            out.push(format!("data.modes = {}", s.modes));
        }
        InitialDataSpec::Fbm(f) => {
            out.push("data.kind = fbm".into());
            out.push(format!("data.hurst = {}", f.hurst));
            out.push(format!("data.amplitude = {}", f.amplitude));
        }
    }
    let s = &c.scheme;
    out.extend([
        format!("scheme.theta = {}", s.theta),
        format!("scheme.epsilon = {}", s.epsilon),
        format!("scheme.cfl = {}", s.cfl),
        format!("scheme.picard_tol = {}", s.picard_tol),
        format!("scheme.picard_max_iters = {}", s.picard_max_iters),
        format!("scheme.dt_floor = {}", s.dt_floor),
        format!("ensemble.samples = {}", c.samples),
        format!("ensemble.seed = {}", c.seed),
        format!("time.t_end = {}", c.t_end),
        format!("time.outputs = {}", join(&c.output_times)),
    ]);
    out
}

/// Reads an ensemble configuration back from `key = value` text.
pub fn ensemble_from_text(text: &str) -> Result<EnsembleConfig> {
    let doc = KvDoc::parse(text)?;
    doc.reject_unknown(KNOWN_KEYS)?;
    ensemble_from_doc(&doc)
}

impl ExperimentConfig {
    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        doc.reject_unknown(KNOWN_KEYS)?;
        let ensemble = ensemble_from_doc(doc)?;

        let p = doc.get_or("stats.p", 2.0)?;
        let l_max = doc.get_or("stats.l_max", default_l_max(ensemble.grid))?;
        let (lo, hi) = default_fit_range(l_max.max(1));
        let fit = (doc.get_or("stats.fit_lo", lo)?, doc.get_or("stats.fit_hi", hi)?);
        let stats = StatsOptions { p, l_max, fit };
        stats.validate(ensemble.grid)?;

        let d = WassersteinOptions::default();
        let wasserstein = WassersteinOptions {
            ks: doc.get_list("wasserstein.k")?.unwrap_or(d.ks),
            tuples: doc.get_or("wasserstein.tuples", d.tuples)?,
            tuple_seed: doc.get_or("wasserstein.tuple_seed", d.tuple_seed)?,
        };
        wasserstein.validate()?;

        let gammas: Vec<f64> = doc.get_list("gamma_study.gammas")?.unwrap_or_default();
        let smallest = gammas.iter().copied().fold(f64::INFINITY, f64::min);
        let reference = doc.get_or("gamma_study.reference", if gammas.is_empty() { 0.0 } else { smallest })?;
        if gammas.iter().chain([&reference]).any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::Config("gamma_study values must be finite and nonnegative".into()));
        }

        Ok(Self {
            ensemble,
            stats,
            wasserstein,
            gamma_study: GammaStudyOptions { gammas, reference },
            output_dir: PathBuf::from(doc.raw("output.dir").unwrap_or("run")),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_doc(&KvDoc::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every resolved setting that can influence an output, one
    /// `key = value` per line. Workers, memory budget and the output
    /// directory are left out so outputs do not depend on them.
    pub fn resolved_lines(&self) -> Vec<String> {
        let mut out = ensemble_lines(&self.ensemble);
        out.extend([
            format!("stats.p = {}", self.stats.p),
            format!("stats.l_max = {}", self.stats.l_max),
            format!("stats.fit_lo = {}", self.stats.fit.0),
            format!("stats.fit_hi = {}", self.stats.fit.1),
            format!("wasserstein.k = {}", join(&self.wasserstein.ks)),
            format!("wasserstein.tuples = {}", self.wasserstein.tuples),
            format!("wasserstein.tuple_seed = {}", self.wasserstein.tuple_seed),
            format!("gamma_study.gammas = {}", join(&self.gamma_study.gammas)),
            format!("gamma_study.reference = {}", self.gamma_study.reference),
        ]);
        out
    }
}

impl StatsOptions {
    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("stats.p = {} must be >= 1", self.p)));
        }
        let limit = grid.n1().min(grid.n2()) / 2;
        if self.l_max == 0 || self.l_max >= limit {
            return Err(Error::Config(format!(
                "stats.l_max = {} must lie in [1, {limit}) on a {grid} grid",
                self.l_max
            )));
        }
        let (lo, hi) = self.fit;
        if lo < 1 || hi > self.l_max || hi < lo + 2 {
            return Err(Error::Config(format!(
                "fit range [{lo}, {hi}] must hold at least 3 radii within [1, {}]",
                self.l_max
            )));
        }
        Ok(())
    }
}

impl WassersteinOptions {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.iter().any(|&k| k == 0 || k > crate::stats::MAX_MARGINAL) {
            return Err(Error::Config(format!(
                "wasserstein.k entries must lie in 1..={}",
                crate::stats::MAX_MARGINAL
            )));
        }
        if self.tuples == 0 {
            return Err(Error::Config("wasserstein.tuples must be positive".into()));
        }
        Ok(())
    }
}
