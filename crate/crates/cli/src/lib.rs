//! Command-line front end: estimation, bound reports, sweeps, verification
//! suites, the exact oracle and pattern-graph summaries.

pub mod commands;
pub mod config;
pub mod suites;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use opnorm_core::bounds::RSource;

use config::{Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "opnorm", version, about = "Operator norms of random matrices with independent entries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimate of E‖(a_ij X_ij)‖ or its p-th moment.
    Estimate(Flags),
    /// Every bound quantity plus the empirical mean, laws rescaled to E|X| = 1.
    Bounds(Flags),
    /// Bound report for each (ensemble, law, n), as CSV rows.
    Sweep(Flags),
    /// Run a verification suite; exits 1 if any check fails.
    Verify(Flags),
    /// Exact mean by enumeration for finitely supported laws.
    Oracle(Flags),
    /// Pattern graph: d_A, degree histogram, connected-subset counts.
    Graph(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON run config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dense CSV coefficient matrix.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Generator name (identity, ones, band, sparse_bernoulli, circulant) or JSON spec.
    #[arg(long)]
    pub gen: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Entry law: rademacher, gaussian, weibull:R, exp_power:A or JSON.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Moment order for `estimate`.
    #[arg(long)]
    pub p: Option<f64>,
    /// Power of the Log Log n and Log d_A factors.
    #[arg(long)]
    pub exponent: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub zero_threshold: Option<f64>,
    #[arg(long)]
    pub suite: Option<String>,
    /// Sizes for `sweep`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Generators for `sweep`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ensembles: Option<Vec<String>>,
    /// Laws for `sweep`; repeat the flag for JSON specs.
    #[arg(long)]
    pub dists: Option<Vec<String>>,
    /// Largest connected-subset size for `graph`.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Also run the masked Orlicz supremum for R.
    #[arg(long)]
    pub analytic: bool,
    /// R estimate used in the upper bounds: bilinear or analytic.
    #[arg(long)]
    pub r_source: Option<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Estimate(f) => ("estimate", f),
            Command::Bounds(f) => ("bounds", f),
            Command::Sweep(f) => ("sweep", f),
            Command::Verify(f) => ("verify", f),
            Command::Oracle(f) => ("oracle", f),
            Command::Graph(f) => ("graph", f),
        }
    }
}

/// Splits comma-separated law names; JSON specs are kept whole.
fn split_dists(v: &[String]) -> Vec<String> {
    v.iter()
        .flat_map(|s| {
            if s.trim_start().starts_with('{') {
                vec![s.clone()]
            } else {
                s.split(',').map(|t| t.trim().to_string()).collect()
            }
        })
        .collect()
}

/// Config file (if any) overridden by the flags.
pub fn resolve(command: &str, f: &Flags) -> Result<RunConfig> {
    let mut c = match &f.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    c.command = command.to_string();
    macro_rules! take {
        ($($field:ident),*) => {$(if let Some(v) = &f.$field { c.$field = v.clone(); })*};
    }
    macro_rules! take_opt {
        ($($field:ident),*) => {$(if f.$field.is_some() { c.$field = f.$field.clone(); })*};
    }
    take!(dist, samples, seed, exponent, zero_threshold, ns, ensembles, k_max);
    take_opt!(matrix, gen, n, p, format, suite);
    if let Some(d) = &f.dists {
        c.dists = split_dists(d);
    }
    if f.analytic {
        c.analytic = true;
    }
    if let Some(r) = &f.r_source {
        c.r_source = match r.as_str() {
            "bilinear" => RSource::Bilinear,
            "analytic" => RSource::Analytic,
            other => return Err(CliError::Usage(format!("unknown r source {other:?}; expected bilinear or analytic")).into()),
        };
    }
    if c.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()).into());
    }
    c.threads = f.threads;
    c.out = f.out.clone();
    Ok(c)
}

/// Exit code for an error: usage 2, resource budget 3, anything else 1.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        match cause.downcast_ref::<CliError>() {
            Some(CliError::Usage(_)) => return EXIT_USAGE,
            Some(CliError::Failed(_)) => return EXIT_FAILURE,
            None => {}
        }
        if let Some(opnorm_core::Error::Budget { .. }) = cause.downcast_ref::<opnorm_core::Error>() {
            return EXIT_BUDGET;
        }
    }
    EXIT_FAILURE
}

fn execute(cfg: &RunConfig) -> Result<commands::Outcome> {
    match cfg.command.as_str() {
        "estimate" => commands::estimate(cfg),
        "bounds" => commands::bounds(cfg),
        "sweep" => commands::sweep(cfg),
        "verify" => commands::verify(cfg),
        "oracle" => commands::oracle(cfg),
        "graph" => commands::graph(cfg),
        other => Err(CliError::Usage(format!("unknown command {other:?}")).into()),
    }
}

fn emit(cfg: &RunConfig, out: &commands::Outcome) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, &out.text).with_context(|| format!("writing {}", path.display()))?;
            if let Some(side) = &out.sidecar {
                let mut p = path.clone().into_os_string();
                p.push(".config.json");
                std::fs::write(&p, side).with_context(|| format!("writing {}", PathBuf::from(&p).display()))?;
            }
        }
        None => std::io::stdout().write_all(out.text.as_bytes())?,
    }
    Ok(())
}

/// Runs a parsed command and returns its exit code.
pub fn run_command(cmd: &Command) -> Result<i32> {
    let (name, flags) = cmd.parts();
    let cfg = resolve(name, flags)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cfg.threads {
            if t == 0 {
                return Err(CliError::Usage("--threads must be at least 1".into()).into());
            }
            b = b.num_threads(t);
        }
        b.build()?
    };
    let out = pool.install(|| execute(&cfg))?;
    emit(&cfg, &out)?;
    Ok(if out.pass { EXIT_OK } else { EXIT_FAILURE })
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_command(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
