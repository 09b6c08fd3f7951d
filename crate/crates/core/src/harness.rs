//! Run configuration, manifests and the experiment commands behind the CLI.
//!
//! Configs are flat `key = value` text. Every command writes its CSV files and
//! a `manifest.json` listing each file with its SHA-256 digest. Trials run on a
//! worker pool of `threads` workers; results are collected in trial order and
//! written by one writer, so the bytes never depend on the pool size.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::{Ensemble, EnsembleOptions, MatrixKind, DEFAULT_MAX_ORDER};
use crate::error::{param, Error, Result};
use crate::fmt17;
use crate::law::{LawVariant, WeightLaw};
use crate::model::{parse_trunc, ModelParams};
use crate::nc_moments::{MomentMethod, MomentModel, MomentOptions, MomentSequence};
use crate::rng::{trial_seeds, Seeds};
use crate::spectra::{
    eigenvalues, empirical_moment, ks_distance, levy_distance, log_grid, survival_function, tail_fit, EmpiricalMeasure,
    SpectralSample, SurvivalTable, TailFit,
};
use crate::stieltjes::{density_by_inversion, solve_fixed_point, stieltjes_transform, SolverConfig, WeightGrid};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Empirical moment comparisons stop at `M_8`.
pub const MAX_EMPIRICAL_K: usize = 4;

/// Pooled eigenvalue count below which tail fits get a warning.
pub const TAIL_ADVISORY_POOL: usize = 10_000;

/// Weight law selection for the analytic commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawChoice {
    /// Hard truncation for moments, conditional law for the solver when
    /// `trunc_m` is finite; the untruncated law otherwise.
    Auto,
    Unit,
    Pareto(LawVariant),
}

impl LawChoice {
    pub fn name(self) -> &'static str {
        match self {
            LawChoice::Auto => "auto",
            LawChoice::Unit => "unit",
            LawChoice::Pareto(LawVariant::Untruncated) => "untruncated",
            LawChoice::Pareto(LawVariant::Hard) => "hard",
            LawChoice::Pareto(LawVariant::Conditional) => "conditional",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(LawChoice::Auto),
            "unit" | "degenerate" => Ok(LawChoice::Unit),
            other => Ok(LawChoice::Pareto(other.parse()?)),
        }
    }

    fn resolve(self, params: &ModelParams, truncated_default: LawVariant) -> WeightLaw {
        match self {
            LawChoice::Unit => WeightLaw::Unit,
            LawChoice::Pareto(v) => WeightLaw::pareto(params.tau, params.trunc_m, v),
            LawChoice::Auto if params.is_truncated() => WeightLaw::pareto(params.tau, params.trunc_m, truncated_default),
            LawChoice::Auto => WeightLaw::untruncated(params.tau),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub seed: u64,
    pub trials: usize,
    pub kind: MatrixKind,
    /// Second ensemble for `compare`.
    pub compare_kind: MatrixKind,
    pub standardize: bool,
    pub law: LawChoice,
    /// Highest moment index `k` (moments `M_2 .. M_2k`).
    pub k: usize,
    pub method: MomentMethod,
    pub empirical: bool,
    pub nodes: usize,
    pub mc_trials: usize,
    pub z: Vec<Complex64>,
    pub x_min: f64,
    pub x_max: f64,
    pub x_step: f64,
    pub eta: f64,
    pub grid: usize,
    pub tail_x_min: f64,
    pub tail_points: usize,
    pub tail_quantile: f64,
    pub edges: Option<Vec<f64>>,
    pub max_order: usize,
    pub dump: bool,
    pub out: PathBuf,
    pub threads: usize,
    /// Multiplies `c_N`; anything but 1 is a deliberate fault for negative controls.
    pub debug_c_scale: f64,
    /// Acceptance criteria run by `validate`; empty means all.
    pub criteria: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            seed: 0,
            trials: 1,
            kind: MatrixKind::Adjacency,
            compare_kind: MatrixKind::DiagWignerDiag,
            standardize: true,
            law: LawChoice::Auto,
            k: 4,
            method: MomentMethod::TreeQuadrature,
            empirical: false,
            nodes: 128,
            mc_trials: 100_000,
            z: vec![Complex64::new(0.0, 1.0)],
            x_min: -4.0,
            x_max: 4.0,
            x_step: 0.05,
            eta: 1e-2,
            grid: 256,
            tail_x_min: 1.5,
            tail_points: 30,
            tail_quantile: 0.999,
            edges: None,
            max_order: DEFAULT_MAX_ORDER,
            dump: false,
            out: PathBuf::from("out"),
            threads: 1,
            debug_c_scale: 1.0,
            criteria: vec![],
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "n",
    "d",
    "alpha",
    "tau",
    "sigma",
    "trunc_m",
    "kernel",
    "seed",
    "trials",
    "kind",
    "compare_kind",
    "standardize",
    "law",
    "k",
    "method",
    "empirical",
    "nodes",
    "mc_trials",
    "z",
    "x_min",
    "x_max",
    "x_step",
    "eta",
    "grid",
    "tail_x_min",
    "tail_points",
    "tail_quantile",
    "edges",
    "max_order",
    "dump",
    "out",
    "threads",
    "debug_c_scale",
    "criteria",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Param(format!("bad value `{v}` for `{key}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => param(format!("bad value `{v}` for `{key}`")),
    }
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn join<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(",")
}

fn complex_text(z: &Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

impl RunConfig {
    /// Parse `key = value` lines; `#` starts a comment. Missing keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Param(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "n" => p.n = num(key, v)?,
            "d" => p.d = num(key, v)?,
            "alpha" => p.alpha = num(key, v)?,
            "tau" => p.tau = num(key, v)?,
            "sigma" => p.sigma = num(key, v)?,
            "trunc_m" => p.trunc_m = parse_trunc(v)?,
            "kernel" => p.kernel = v.parse()?,
            "seed" => self.seed = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "kind" => self.kind = v.parse()?,
            "compare_kind" => self.compare_kind = v.parse()?,
            "standardize" => self.standardize = boolean(key, v)?,
            "law" => self.law = LawChoice::parse(v)?,
            "k" => self.k = num(key, v)?,
            "method" => self.method = v.parse()?,
            "empirical" => self.empirical = boolean(key, v)?,
            "nodes" => self.nodes = num(key, v)?,
            "mc_trials" => self.mc_trials = num(key, v)?,
            "z" => {
                self.z = list(v, |s| {
                    s.replace(' ', "").parse::<Complex64>().map_err(|_| Error::Param(format!("bad complex `{s}`")))
                })?
            }
            "x_min" => self.x_min = num(key, v)?,
            "x_max" => self.x_max = num(key, v)?,
            "x_step" => self.x_step = num(key, v)?,
            "eta" => self.eta = num(key, v)?,
            "grid" => self.grid = num(key, v)?,
            "tail_x_min" => self.tail_x_min = num(key, v)?,
            "tail_points" => self.tail_points = num(key, v)?,
            "tail_quantile" => self.tail_quantile = num(key, v)?,
            "edges" => {
                let e = list(v, |s| num::<f64>("edges", s))?;
                self.edges = if e.is_empty() { None } else { Some(e) };
            }
            "max_order" => self.max_order = num(key, v)?,
            "dump" => self.dump = boolean(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "threads" => self.threads = num(key, v)?,
            "debug_c_scale" => self.debug_c_scale = num(key, v)?,
            "criteria" => {
                self.criteria = if v.trim().eq_ignore_ascii_case("all") { vec![] } else { list(v, |s| num("criteria", s))? }
            }
            other => return param(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Apply `--key value` style overrides, already split into pairs.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k.trim_start_matches("--").replace('-', "_").as_str(), v)?;
        }
        Ok(())
    }

    /// Canonical key/value echo; parsing it back gives the same config.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let p = &self.params;
        let trunc = if p.trunc_m.is_finite() { p.trunc_m.to_string() } else { "inf".into() };
        let pairs: Vec<(&str, String)> = vec![
            ("n", p.n.to_string()),
            ("d", p.d.to_string()),
            ("alpha", p.alpha.to_string()),
            ("tau", p.tau.to_string()),
            ("sigma", p.sigma.to_string()),
            ("trunc_m", trunc),
            ("kernel", p.kernel.name().into()),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.to_string()),
            ("kind", self.kind.name().into()),
            ("compare_kind", self.compare_kind.name().into()),
            ("standardize", self.standardize.to_string()),
            ("law", self.law.name().into()),
            ("k", self.k.to_string()),
            ("method", self.method.name().into()),
            ("empirical", self.empirical.to_string()),
            ("nodes", self.nodes.to_string()),
            ("mc_trials", self.mc_trials.to_string()),
            ("z", join(&self.z, complex_text)),
            ("x_min", self.x_min.to_string()),
            ("x_max", self.x_max.to_string()),
            ("x_step", self.x_step.to_string()),
            ("eta", self.eta.to_string()),
            ("grid", self.grid.to_string()),
            ("tail_x_min", self.tail_x_min.to_string()),
            ("tail_points", self.tail_points.to_string()),
            ("tail_quantile", self.tail_quantile.to_string()),
            ("edges", self.edges.as_deref().map(|e| join(e, |x| x.to_string())).unwrap_or_default()),
            ("max_order", self.max_order.to_string()),
            ("dump", self.dump.to_string()),
            ("out", self.out.display().to_string()),
            ("threads", self.threads.to_string()),
            ("debug_c_scale", self.debug_c_scale.to_string()),
            ("criteria", if self.criteria.is_empty() { "all".into() } else { join(&self.criteria, |c| c.to_string()) }),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    /// Checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Validation("threads must be at least 1".into()));
        }
        if !(self.debug_c_scale > 0.0) {
            return param("debug_c_scale must be positive");
        }
        Ok(())
    }

    pub fn ensemble(&self, kind: MatrixKind) -> Ensemble {
        Ensemble::new(self.params, kind).with_options(EnsembleOptions {
            max_order: self.max_order,
            scaling_override: None,
            scaling_factor: self.debug_c_scale,
        })
    }

    pub fn seeds(&self) -> Vec<Seeds> {
        (0..self.trials as u64).map(|t| trial_seeds(self.seed, t)).collect()
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig { eta_target: self.eta, ..SolverConfig::default() }
    }

    fn x_grid(&self) -> Result<Vec<f64>> {
        if !(self.x_step > 0.0) || !(self.x_max >= self.x_min) {
            return param("density grid needs x_step > 0 and x_max >= x_min");
        }
        let n = ((self.x_max - self.x_min) / self.x_step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.x_min + i as f64 * self.x_step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub trial: u64,
    pub weight: u64,
    pub noise: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: BTreeMap<String, String>,
    pub version: String,
    pub timestamp_utc: String,
    pub seeds: Vec<SeedRecord>,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl RunManifest {
    /// Recompute every listed digest; returns the paths that do not match.
    pub fn verify(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let mut bad = vec![];
        for o in &self.outputs {
            let bytes = fs::read(dir.as_ref().join(&o.path))?;
            if sha256_hex(&bytes) != o.sha256 {
                bad.push(o.path.clone());
            }
        }
        Ok(bad)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.as_ref().join("manifest.json"))?)?)
    }
}

/// Single writer for one command's outputs.
pub struct OutputSink {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
}

impl OutputSink {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Resource(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir, outputs: vec![] })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Resource(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(OutputRecord { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    /// Write `manifest.json` and return every file written, manifest last.
    pub fn finish(self, cfg: &RunConfig, seeds: &[Seeds]) -> Result<Vec<PathBuf>> {
        let manifest = RunManifest {
            config: cfg.to_pairs(),
            version: VERSION.to_string(),
            timestamp_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seeds: seeds
                .iter()
                .enumerate()
                .map(|(t, s)| SeedRecord { trial: t as u64, weight: s.weight, noise: s.noise })
                .collect(),
            outputs: self.outputs.clone(),
        };
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        let mut files: Vec<PathBuf> = self.outputs.iter().map(|o| self.dir.join(&o.path)).collect();
        files.push(path);
        Ok(files)
    }
}

pub fn eigenvalue_csv(sample: &SpectralSample) -> String {
    let mut s = String::from("index,lambda\n");
    for (i, l) in sample.eigenvalues.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt17(*l));
    }
    s
}

pub fn survival_csv(table: &SurvivalTable) -> String {
    let mut s = String::from("x,survival\n");
    for (x, v) in table.x.iter().zip(&table.survival) {
        let _ = writeln!(s, "{},{}", fmt17(*x), fmt17(*v));
    }
    s
}

/// `order,value` rows.
pub fn moments_csv(rows: &[(u32, f64)]) -> String {
    let mut s = String::from("order,value\n");
    for (o, v) in rows {
        let _ = writeln!(s, "{o},{}", fmt17(*v));
    }
    s
}

/// Sample and diagonalize `trials` matrices on the configured pool, in trial order.
pub fn sample_spectra(cfg: &RunConfig, kind: MatrixKind) -> Result<Vec<SpectralSample>> {
    cfg.validate()?;
    cfg.params.validate()?;
    let ens = cfg.ensemble(kind);
    ens.validate()?;
    let seeds = cfg.seeds();
    cfg.pool()?.install(|| seeds.par_iter().map(|&s| eigenvalues(&ens.sample(s)?)).collect())
}

fn standardized(samples: &[SpectralSample]) -> Result<EmpiricalMeasure> {
    let m = EmpiricalMeasure::pooled(samples)?;
    let s = m.moment(2).sqrt();
    if !(s > 0.0) {
        return Err(Error::Numerical("cannot standardize a spectrum with zero second moment".into()));
    }
    EmpiricalMeasure::new(m.atoms.iter().map(|x| x / s).collect())
}

pub fn cmd_sample(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    cfg.params.validate()?;
    let ens = cfg.ensemble(cfg.kind);
    ens.validate()?;
    let seeds = cfg.seeds();
    let mut sink = OutputSink::create(&cfg.out)?;
    let results: Vec<(SpectralSample, Option<Vec<u8>>)> = cfg.pool()?.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let m = ens.sample(s)?;
                let dump = if cfg.dump {
                    let mut buf = vec![];
                    m.write_binary(&mut buf)?;
                    Some(buf)
                } else {
                    None
                };
                Ok((eigenvalues(&m)?, dump))
            })
            .collect::<Result<_>>()
    })?;
    for (t, (sample, dump)) in results.iter().enumerate() {
        sink.write(&format!("eigenvalues_{t:04}.csv"), eigenvalue_csv(sample).as_bytes())?;
        if let Some(d) = dump {
            sink.write(&format!("matrix_{t:04}.bin"), d)?;
        }
    }
    sink.finish(cfg, &seeds)
}

/// Pooled histogram and empirical moments.
pub fn cmd_esd(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let samples = sample_spectra(cfg, cfg.kind)?;
    let pooled = EmpiricalMeasure::pooled(&samples)?;
    let h = match &cfg.edges {
        Some(e) => pooled.histogram_with_edges(e)?,
        None => pooled.histogram(),
    };
    let mut csv = String::from("left,right,count,density\n");
    for (i, d) in h.densities().iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{}", fmt17(h.edges[i]), fmt17(h.edges[i + 1]), h.counts[i], fmt17(*d));
    }
    let rows: Vec<(u32, f64)> = (1..=5).map(|j| (2 * j, pooled.moment(2 * j))).collect();
    let mut sink = OutputSink::create(&cfg.out)?;
    sink.write("esd.csv", csv.as_bytes())?;
    sink.write("moments.csv", moments_csv(&rows).as_bytes())?;
    sink.finish(cfg, &cfg.seeds())
}

pub fn moment_model(cfg: &RunConfig) -> MomentModel {
    MomentModel::new(cfg.law.resolve(&cfg.params, LawVariant::Hard), cfg.params.kernel())
}

/// Per-order mean and standard error of `(1/N^d) tr A^{2j}` across trials.
pub fn empirical_moments(samples: &[SpectralSample], k: usize) -> Result<Vec<(f64, f64)>> {
    (1..=k)
        .map(|j| {
            let v: Vec<f64> = samples.iter().map(|s| empirical_moment(s, 2 * j as u32)).collect::<Result<_>>()?;
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let se = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                f64::NAN
            };
            Ok((mean, se))
        })
        .collect()
}

pub fn cmd_moments(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if cfg.k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    if cfg.empirical && cfg.k > MAX_EMPIRICAL_K {
        return Err(Error::Validation(format!(
            "empirical moment comparison supports k <= {MAX_EMPIRICAL_K}, got k = {}",
            cfg.k
        )));
    }
    let model = moment_model(cfg);
    let opts = MomentOptions { nodes: cfg.nodes, mc_trials: cfg.mc_trials, seed: cfg.seed };
    let seq = MomentSequence::compute(cfg.k, &model, cfg.method, &opts)?;
    let mut sink = OutputSink::create(&cfg.out)?;
    sink.write("moments_theory.csv", seq.to_csv().as_bytes())?;
    let mut seeds = vec![];
    if cfg.empirical {
        let samples = sample_spectra(cfg, cfg.kind)?;
        seeds = cfg.seeds();
        let emp = empirical_moments(&samples, cfg.k)?;
        let mut csv = String::from("k,theory,theory_stderr,empirical,empirical_stderr\n");
        for (j, (m, se)) in emp.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                j + 1,
                fmt17(seq.values[j + 1]),
                fmt17(seq.stderrs[j + 1]),
                fmt17(*m),
                fmt17(*se)
            );
        }
        let rows: Vec<(u32, f64)> = emp.iter().enumerate().map(|(j, (m, _))| (2 * (j as u32 + 1), *m)).collect();
        sink.write("moments_empirical.csv", moments_csv(&rows).as_bytes())?;
        sink.write("moments_compare.csv", csv.as_bytes())?;
    }
    sink.finish(cfg, &seeds)
}

pub fn weight_grid(cfg: &RunConfig) -> Result<WeightGrid> {
    let law = cfg.law.resolve(&cfg.params, LawVariant::Conditional);
    if law != WeightLaw::Unit {
        cfg.params.validate()?;
        if !law.is_truncated() {
            cfg.params.validate_untruncated_stieltjes()?;
        }
    }
    WeightGrid::new(law, cfg.params.kernel(), cfg.grid)
}

pub fn cmd_stieltjes(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let grid = weight_grid(cfg)?;
    let scfg = cfg.solver_config();
    scfg.validate(&grid)?;
    let rows: Vec<(Complex64, Complex64, usize, f64)> = cfg.pool()?.install(|| {
        cfg.z
            .par_iter()
            .map(|&z| {
                if !(z.im > 0.0) {
                    return param(format!("z = {z} must lie in the upper half-plane"));
                }
                let f = solve_fixed_point(z, &grid, &scfg)?;
                let s = stieltjes_transform(&f, &grid)?;
                Ok((z, s, f.total_iterations, f.residual))
            })
            .collect::<Result<_>>()
    })?;
    let mut csv = String::from("re_z,im_z,re_S,im_S,iters,residual\n");
    for (z, s, it, r) in rows {
        let _ = writeln!(csv, "{},{},{},{},{it},{}", fmt17(z.re), fmt17(z.im), fmt17(s.re), fmt17(s.im), fmt17(r));
    }
    let mut sink = OutputSink::create(&cfg.out)?;
    sink.write("stieltjes.csv", csv.as_bytes())?;
    sink.finish(cfg, &[])
}

pub fn cmd_density(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let grid = weight_grid(cfg)?;
    let scfg = cfg.solver_config();
    scfg.validate(&grid)?;
    let xs = cfg.x_grid()?;
    let pts = cfg.pool()?.install(|| density_by_inversion(&grid, &scfg, &xs, cfg.eta))?;
    let mut csv = String::from("x,density,eta,residual\n");
    for p in &pts {
        let _ = writeln!(csv, "{},{},{},{}", fmt17(p.x), fmt17(p.density), fmt17(p.eta), fmt17(p.residual));
    }
    let mut sink = OutputSink::create(&cfg.out)?;
    sink.write("density.csv", csv.as_bytes())?;
    sink.finish(cfg, &[])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub fit: TailFit,
    pub x_min: f64,
    pub x_max: f64,
    pub pooled: usize,
    pub target_slope: f64,
    pub target_intercept: f64,
}

/// `−2(τ−1)` and `ln(½ m₁^{τ−1})` for the law the matrix weights are drawn from.
pub fn tail_targets(params: &ModelParams) -> (f64, f64) {
    let tau = params.tau;
    let m1 = WeightLaw::pareto(tau, params.trunc_m, LawVariant::Hard).moment(1.0);
    (-2.0 * (tau - 1.0), (0.5 * m1.powf(tau - 1.0)).ln())
}

/// Survival table on a log grid over `[x_min, quantile]` of the pooled spectrum, and its fit.
pub fn tail_analysis(
    samples: &[SpectralSample],
    params: &ModelParams,
    x_min: f64,
    quantile: f64,
    points: usize,
) -> Result<(SurvivalTable, TailReport)> {
    let pooled = EmpiricalMeasure::pooled(samples)?;
    if pooled.is_empty() {
        return Err(Error::Data("no eigenvalues to fit".into()));
    }
    if pooled.len() < TAIL_ADVISORY_POOL {
        eprintln!("warning: only {} pooled eigenvalues for a tail fit (advised >= {TAIL_ADVISORY_POOL})", pooled.len());
    }
    let x_max = pooled.atoms[((pooled.len() - 1) as f64 * quantile) as usize];
    if !(x_max > x_min) {
        return Err(Error::Data(format!("quantile {quantile} of the spectrum ({x_max}) is not above x_min = {x_min}")));
    }
    let table = survival_function(samples, &log_grid(x_min, x_max, points))?;
    let fit = tail_fit(&table, x_min)?;
    let (target_slope, target_intercept) = tail_targets(params);
    Ok((table, TailReport { fit, x_min, x_max, pooled: pooled.len(), target_slope, target_intercept }))
}

pub fn cmd_tail(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.params.sigma != 1.0 {
        return Err(Error::Domain(format!("tail analysis requires sigma = 1, got sigma = {}", cfg.params.sigma)));
    }
    let samples = sample_spectra(cfg, cfg.kind)?;
    let (table, r) = tail_analysis(&samples, &cfg.params, cfg.tail_x_min, cfg.tail_quantile, cfg.tail_points)?;
    let f = r.fit;
    let mut fit = String::from(
        "slope,slope_stderr,intercept,intercept_stderr,points,pooled,x_min,x_max,target_slope,target_intercept\n",
    );
    let _ = writeln!(
        fit,
        "{},{},{},{},{},{},{},{},{},{}",
        fmt17(f.slope),
        fmt17(f.slope_stderr),
        fmt17(f.intercept),
        fmt17(f.intercept_stderr),
        f.points,
        r.pooled,
        fmt17(r.x_min),
        fmt17(r.x_max),
        fmt17(r.target_slope),
        fmt17(r.target_intercept)
    );
    let mut sink = OutputSink::create(&cfg.out)?;
    sink.write("survival.csv", survival_csv(&table).as_bytes())?;
    sink.write("tail_fit.csv", fit.as_bytes())?;
    sink.finish(cfg, &cfg.seeds())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub ks: f64,
    pub levy: f64,
}

pub fn compare_spectra(a: &[SpectralSample], b: &[SpectralSample], standardize: bool) -> Result<Comparison> {
    let (ma, mb) = if standardize {
        (standardized(a)?, standardized(b)?)
    } else {
        (EmpiricalMeasure::pooled(a)?, EmpiricalMeasure::pooled(b)?)
    };
    Ok(Comparison { ks: ks_distance(&ma, &mb), levy: levy_distance(&ma, &mb) })
}

/// Distances between the pooled spectra of `kind` and `compare_kind` on the same seeds.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let a = sample_spectra(cfg, cfg.kind)?;
    let b = sample_spectra(cfg, cfg.compare_kind)?;
    let c = compare_spectra(&a, &b, cfg.standardize)?;
    let csv = format!(
        "kind_a,kind_b,standardized,ks,levy\n{},{},{},{},{}\n",
        cfg.kind.name(),
        cfg.compare_kind.name(),
        cfg.standardize,
        fmt17(c.ks),
        fmt17(c.levy)
    );
    let mut sink = OutputSink::create(&cfg.out)?;
    sink.write("compare.csv", csv.as_bytes())?;
    sink.finish(cfg, &cfg.seeds())
}

/// Run the acceptance suite; the report is also written to `validation.json`.
pub fn cmd_validate(cfg: &RunConfig) -> Result<crate::acceptance::ValidationReport> {
    cfg.validate()?;
    let report = crate::acceptance::run(cfg)?;
    let mut sink = OutputSink::create(&cfg.out)?;
    sink.write("validation.json", (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    sink.finish(cfg, &[])?;
    Ok(report)
}
