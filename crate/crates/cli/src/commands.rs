use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Result;
use opnorm_core::bounds::{bound_report, BoundConfig, RSource};
use opnorm_core::matgraph::{connected_subset_bound, enumerate_connected_subsets, pattern_graph, symmetrize};
use opnorm_core::norms::{estimate_op_mean, estimate_op_moment, exact_mean_discrete};
use opnorm_core::{Ens, Report};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{generated, parse_dist, Format, RunConfig};
use crate::suites::run_suite;
use crate::CliError;

/// Rendered output plus whether the run passed.
pub struct Outcome {
    pub text: String,
    /// Resolved config for CSV output, written next to the output file.
    pub sidecar: Option<String>,
    pub pass: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            text,
            sidecar: None,
            pass: true,
        }
    }

    fn csv(text: String, cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            text,
            sidecar: Some(serde_json::to_string_pretty(cfg)? + "\n"),
            pass: true,
        })
    }
}

pub fn envelope(cfg: &RunConfig, result: impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(&json!({ "config": cfg, "result": result }))? + "\n")
}

fn write_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn estimate(cfg: &RunConfig) -> Result<Outcome> {
    let (a, label) = cfg.coeffs()?;
    let dist = cfg.dist()?;
    let ens = Ens::uniform(a, dist.clone());
    let r = match cfg.p {
        Some(p) => estimate_op_moment(&ens, p, cfg.samples, cfg.seed)?,
        None => estimate_op_mean(&ens, cfg.samples, cfg.seed)?,
    };
    match cfg.format_or(Format::Json) {
        Format::Json => Ok(Outcome::ok(envelope(cfg, &r)?)),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                ensemble: String,
                n: usize,
                dist: String,
                seed: u64,
                samples: usize,
                p: Option<f64>,
                mean: f64,
                stderr: f64,
                elapsed: f64,
            }
            let row = Row {
                ensemble: label,
                n: ens.n(),
                dist: dist.label(),
                seed: r.seed,
                samples: r.n_samples,
                p: r.p,
                mean: r.mean,
                stderr: r.stderr,
                elapsed: r.elapsed,
            };
            Outcome::csv(write_csv(&[row])?, cfg)
        }
    }
}

/// Bound settings taken from the run config.
pub fn bound_config(cfg: &RunConfig) -> BoundConfig {
    BoundConfig {
        exponent: cfg.exponent,
        n_samples: cfg.samples,
        seed: cfg.seed,
        analytic: cfg.analytic || cfg.r_source == RSource::Analytic,
        r_source: cfg.r_source,
        zero_threshold: cfg.zero_threshold,
        ..Default::default()
    }
}

/// Columns of the sweep CSV, in order.
pub const SWEEP_COLUMNS: [&str; 21] = [
    "ensemble",
    "n",
    "dist",
    "seed",
    "samples",
    "m",
    "gaussian_formula",
    "quarter_log",
    "weibull_r",
    "weibull",
    "r_lower",
    "r_upper",
    "d",
    "main_lower",
    "main_upper",
    "d_a",
    "da_upper",
    "empirical",
    "stderr",
    "ratio",
    "elapsed",
];

/// One sweep row; `ratio` is `empirical / main_upper` and `elapsed` is wall
/// time in seconds.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub ensemble: String,
    pub n: usize,
    pub dist: String,
    pub seed: u64,
    pub samples: usize,
    pub m: f64,
    pub gaussian_formula: f64,
    pub quarter_log: f64,
    pub weibull_r: f64,
    pub weibull: f64,
    pub r_lower: f64,
    pub r_upper: f64,
    pub d: f64,
    pub main_lower: f64,
    pub main_upper: f64,
    pub d_a: usize,
    pub da_upper: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub ratio: f64,
    pub elapsed: f64,
}

impl SweepRow {
    pub fn from_report(r: &Report, dist: String, seed: u64, elapsed: f64) -> Self {
        Self {
            ensemble: r.ensemble.clone(),
            n: r.n,
            dist,
            seed,
            samples: r.empirical.n_samples,
            m: r.m,
            gaussian_formula: r.gaussian_formula,
            quarter_log: r.quarter_log,
            weibull_r: r.weibull_r,
            weibull: r.weibull,
            r_lower: r.r_lower,
            r_upper: r.r_upper,
            d: r.d,
            main_lower: r.main_lower,
            main_upper: r.main_upper,
            d_a: r.d_a,
            da_upper: r.da_upper,
            empirical: r.empirical.mean,
            stderr: r.empirical.stderr,
            ratio: r.empirical.mean / r.main_upper,
            elapsed,
        }
    }
}

pub fn bounds(cfg: &RunConfig) -> Result<Outcome> {
    let (a, label) = cfg.coeffs()?;
    let dist = cfg.dist()?;
    let start = Instant::now();
    let rep = bound_report(&Ens::uniform(a, dist.clone()), &label, &bound_config(cfg))?;
    match cfg.format_or(Format::Json) {
        Format::Json => Ok(Outcome::ok(envelope(cfg, &rep)?)),
        Format::Csv => {
            let row = SweepRow::from_report(&rep, dist.label(), cfg.seed, start.elapsed().as_secs_f64());
            Outcome::csv(write_csv(&[row])?, cfg)
        }
    }
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let ensembles: Vec<String> = if !cfg.ensembles.is_empty() {
        cfg.ensembles.clone()
    } else if let Some(g) = &cfg.gen {
        vec![g.clone()]
    } else {
        return Err(CliError::Usage("sweep needs --ensembles or --gen".into()).into());
    };
    let ns: Vec<usize> = if !cfg.ns.is_empty() {
        cfg.ns.clone()
    } else {
        cfg.n.into_iter().collect()
    };
    if ns.is_empty() {
        return Err(CliError::Usage("sweep needs --ns".into()).into());
    }
    let dists = if cfg.dists.is_empty() {
        vec![cfg.dist.clone()]
    } else {
        cfg.dists.clone()
    };
    let mut jobs = Vec::new();
    for e in &ensembles {
        for d in &dists {
            let law = parse_dist(d)?;
            for &n in &ns {
                let (a, label) = generated(e, Some(n), cfg.seed)?;
                jobs.push((Ens::uniform(a, law.clone()), label, law.label()));
            }
        }
    }
    let bc = bound_config(cfg);
    let rows: Vec<Result<SweepRow>> = jobs
        .par_iter()
        .map(|(ens, label, dist)| {
            let start = Instant::now();
            let rep = bound_report(ens, label, &bc)?;
            Ok(SweepRow::from_report(&rep, dist.clone(), cfg.seed, start.elapsed().as_secs_f64()))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    match cfg.format_or(Format::Csv) {
        Format::Json => Ok(Outcome::ok(envelope(cfg, &rows)?)),
        Format::Csv => Outcome::csv(write_csv(&rows)?, cfg),
    }
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let name = cfg
        .suite
        .as_deref()
        .ok_or_else(|| CliError::Usage("verify needs --suite NAME".into()))?;
    let rep = run_suite(name, cfg.seed)?;
    if cfg.format_or(Format::Json) == Format::Csv {
        return Err(CliError::Usage("verify writes JSON only".into()).into());
    }
    Ok(Outcome {
        text: envelope(cfg, &rep)?,
        sidecar: None,
        pass: rep.pass,
    })
}

pub fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let (a, label) = cfg.coeffs()?;
    let dist = cfg.dist()?;
    let n = a.n();
    let v = exact_mean_discrete(&Ens::uniform(a, dist.clone()))?;
    match cfg.format_or(Format::Json) {
        Format::Json => Ok(Outcome::ok(envelope(cfg, json!({ "n": n, "exact_mean": v }))?)),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                ensemble: String,
                n: usize,
                dist: String,
                exact_mean: f64,
            }
            let row = Row {
                ensemble: label,
                n,
                dist: dist.label(),
                exact_mean: v,
            };
            Outcome::csv(write_csv(&[row])?, cfg)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SubsetCount {
    pub k: usize,
    pub count: usize,
    pub bound: f64,
}

#[derive(Debug, Serialize)]
pub struct GraphSummary {
    pub n: usize,
    pub d_a: usize,
    pub edges: usize,
    /// Degree to number of vertices.
    pub degree_histogram: BTreeMap<usize, usize>,
    pub connected_subsets: Vec<SubsetCount>,
}

pub fn graph(cfg: &RunConfig) -> Result<Outcome> {
    let (a, _) = cfg.coeffs()?;
    let g = if a.is_symmetric() {
        pattern_graph(&a, cfg.zero_threshold)?
    } else {
        pattern_graph(&symmetrize(&a), cfg.zero_threshold)?
    };
    let d = g.max_degree();
    let mut counts = Vec::new();
    for k in 1..=cfg.k_max.min(g.n()) {
        counts.push(SubsetCount {
            k,
            count: enumerate_connected_subsets(&g, k)?.len(),
            bound: connected_subset_bound(g.n(), d, k),
        });
    }
    let summary = GraphSummary {
        n: g.n(),
        d_a: d,
        edges: g.edge_count(),
        degree_histogram: g.degree_histogram(),
        connected_subsets: counts,
    };
    match cfg.format_or(Format::Json) {
        Format::Json => Ok(Outcome::ok(envelope(cfg, &summary)?)),
        Format::Csv => Outcome::csv(write_csv(&summary.connected_subsets)?, cfg),
    }
}
