use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbrg::harness::{self, RunConfig, CONFIG_KEYS};

/// Spectra of kernel-based random graphs: sampling, moments, Stieltjes
/// transforms, tail fits and the acceptance suite.
#[derive(Parser)]
#[command(name = "kbrg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample matrices and write per-trial eigenvalue CSVs.
    Sample(Common),
    /// Pooled spectral histogram and empirical moments.
    Esd(Common),
    /// Limiting moments, optionally against empirical ones.
    Moments(Common),
    /// Stieltjes transform at the configured z points.
    Stieltjes(Common),
    /// Density by Stieltjes inversion on an x grid.
    Density(Common),
    /// Survival function and power-law tail fit (sigma = 1 only).
    Tail(Common),
    /// KS and Lévy distances between two ensembles.
    Compare(Common),
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Any other config key as `--key value`, e.g. `--tau 3 --kind dwd`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> kbrg::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        let mut pairs = vec![];
        let mut it = self.overrides.iter();
        while let Some(k) = it.next() {
            let key = k
                .strip_prefix("--")
                .ok_or_else(|| kbrg::Error::Param(format!("expected `--key value`, got `{k}`")))?;
            let (key, value) = match key.split_once('=') {
                Some((a, b)) => (a.to_string(), b.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| kbrg::Error::Param(format!("missing value for `--{key}`")))?;
                    (key.to_string(), v.clone())
                }
            };
            let norm = key.replace('-', "_");
            if !CONFIG_KEYS.contains(&norm.as_str()) {
                return Err(kbrg::Error::Param(format!("unknown option `--{key}`")));
            }
            pairs.push((norm, value));
        }
        cfg.apply_overrides(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())))?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> kbrg::Result<bool> {
    let (common, f): (&Common, fn(&RunConfig) -> kbrg::Result<Vec<PathBuf>>) = match &cli.command {
        Command::Sample(c) => (c, harness::cmd_sample),
        Command::Esd(c) => (c, harness::cmd_esd),
        Command::Moments(c) => (c, harness::cmd_moments),
        Command::Stieltjes(c) => (c, harness::cmd_stieltjes),
        Command::Density(c) => (c, harness::cmd_density),
        Command::Tail(c) => (c, harness::cmd_tail),
        Command::Compare(c) => (c, harness::cmd_compare),
        Command::Validate(c) => {
            let report = harness::cmd_validate(&c.config()?)?;
            let passed = report.criteria.iter().filter(|c| c.passed).count();
            println!("{passed}/{} criteria passed", report.criteria.len());
            return Ok(report.passed);
        }
    };
    for p in f(&common.config()?)? {
        println!("{}", p.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
