//! Verification suites shared by `opnorm verify` and the acceptance tests.

use std::time::Instant;

use anyhow::{bail, Result};
use opnorm_core::bounds::{
    bound_report, gaussian_formula, loglog_factor, quarter_log_bound, r_estimate, weibull_bound, BoundConfig,
    RemovalConfig,
};
use opnorm_core::dist::{
    exp_moment_bound, exp_moment_eta, expected_finite_sup, moment_growth_constant, product_decompose,
    product_tail_domination, subexp_integral,
};
use opnorm_core::matgraph::{connected_subset_bound, enumerate_connected_subsets, GenSpec, GraphView, GENERATOR_NAMES};
use opnorm_core::norms::{estimate_op_mean, exact_mean_discrete, AscentConfig};
use opnorm_core::orlicz::max_linear;
use opnorm_core::rng::{child_seed, domain, substream, Stream};
use opnorm_core::{Budget, Coeff, Dist, Ens};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One measured property with its admissible window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

impl Check {
    pub fn within(name: impl Into<String>, measured: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        let pass = !measured.is_nan() && lo.is_none_or(|l| measured >= l) && hi.is_none_or(|h| measured <= h);
        Self {
            name: name.into(),
            pass,
            measured,
            lo,
            hi,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, hi: f64) -> Self {
        Self::within(name, measured, None, Some(hi))
    }

    pub fn at_least(name: impl Into<String>, measured: f64, lo: f64) -> Self {
        Self::within(name, measured, Some(lo), None)
    }

    /// Recorded value without a window.
    pub fn info(name: impl Into<String>, measured: f64) -> Self {
        Self::within(name, measured, None, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub elapsed: f64,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

pub const SUITES: [&str; 11] = [
    "oracle",
    "gaussian-formula",
    "connected-subsets",
    "exp-moment",
    "orlicz-gaussian",
    "r-sandwich",
    "main-scaling",
    "product-decomposition",
    "quarter-log",
    "weibull-upper",
    "da-bound",
];

/// Runs the named suite. Unknown names are usage errors.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let Some(id) = SUITES.iter().position(|&s| s == name) else {
        return Err(CliError::Usage(format!("unknown suite {name:?}; expected one of {SUITES:?}")).into());
    };
    let start = Instant::now();
    let s = Seeds { seed, id: id as u64 };
    let checks = match name {
        "oracle" => oracle(&s)?,
        "gaussian-formula" => gaussian_formula_window(&s)?,
        "connected-subsets" => connected_subsets(&s)?,
        "exp-moment" => exp_moment()?,
        "orlicz-gaussian" => orlicz_gaussian(&s)?,
        "r-sandwich" => r_sandwich(&s)?,
        "main-scaling" => main_scaling(&s)?,
        "product-decomposition" => product_decomposition(&s)?,
        "quarter-log" => fitted_upper(&s, Dist::rademacher(), None)?,
        "weibull-upper" => weibull_upper(&s)?,
        "da-bound" => da_bound_band(&s)?,
        _ => unreachable!(),
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Seeds for instance `i` of a suite.
struct Seeds {
    seed: u64,
    id: u64,
}

impl Seeds {
    fn child(&self, i: u64) -> u64 {
        child_seed(self.seed, domain::SUITE, (self.id << 32) + i)
    }

    fn stream(&self, i: u64) -> Stream {
        substream(self.seed, domain::SUITE, (self.id << 32) + i)
    }
}

fn named(gen: &str, n: usize, seed: u64) -> Result<Coeff> {
    Ok(GenSpec::named(gen, n, seed)?.build()?)
}

fn random_signs(n: usize, rng: &mut Stream) -> Coeff {
    Coeff::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }).expect("finite")
}

fn oracle(s: &Seeds) -> Result<Vec<Check>> {
    let mut rng = s.stream(0);
    let mut catalog: Vec<(String, Coeff)> = Vec::new();
    for n in [2usize, 3] {
        catalog.push((format!("ones{n}"), named("ones", n, 0)?));
        catalog.push((format!("identity{n}"), named("identity", n, 0)?));
        catalog.push((format!("first-row{n}"), Coeff::from_fn(n, |i, j| if i == 0 { (j + 1) as f64 } else { 0.0 })?));
        for k in 0..3 {
            catalog.push((format!("signs{n}-{k}"), random_signs(n, &mut rng)));
        }
    }
    let results: Vec<Result<(String, f64, f64, f64)>> = catalog
        .par_iter()
        .enumerate()
        .map(|(i, (name, a))| {
            let ens = Ens::uniform(a.clone(), Dist::rademacher());
            let exact = exact_mean_discrete(&ens)?;
            let est = estimate_op_mean(&ens, 100_000, s.child(i as u64 + 1))?;
            Ok((name.clone(), exact, est.mean, est.stderr))
        })
        .collect();
    let mut checks = Vec::new();
    for r in results {
        let (name, exact, mean, se) = r?;
        if name == "ones2" {
            checks.push(Check::at_most("ones2 exact vs 1+1/sqrt2", (exact - (1.0 + 0.5f64.sqrt())).abs(), 1e-12));
        }
        checks.push(Check::at_most(format!("{name} |estimate-exact|"), (mean - exact).abs(), 3.0 * se + 1e-12));
    }
    Ok(checks)
}

const SCALING_NS: [usize; 6] = [8, 16, 32, 64, 128, 256];

fn gaussian_formula_window(s: &Seeds) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (g, gen) in GENERATOR_NAMES.iter().enumerate() {
        let mut ratios = Vec::new();
        for (k, &n) in SCALING_NS.iter().enumerate() {
            let a = named(gen, n, s.seed)?;
            let formula = gaussian_formula(&a);
            let est = estimate_op_mean(&Ens::uniform(a, Dist::gaussian()), 2000, s.child((g * 16 + k) as u64))?;
            let ratio = est.mean / formula;
            checks.push(Check::within(format!("{gen} n={n} ratio"), ratio, Some(0.05), Some(5.0)));
            ratios.push(ratio);
        }
        checks.push(Check::at_most(format!("{gen} spread"), spread(&ratios), 4.0));
    }
    Ok(checks)
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Connected `k`-subsets by checking every `k`-subset with a graph search.
fn brute_force_count(m: usize, adj: &[u32], k: usize) -> usize {
    (0u32..1 << m)
        .filter(|set| set.count_ones() as usize == k)
        .filter(|&set| {
            let start = set.trailing_zeros();
            let mut seen = 1u32 << start;
            let mut frontier = seen;
            while frontier != 0 {
                let v = frontier.trailing_zeros();
                frontier &= frontier - 1;
                let next = adj[v as usize] & set & !seen;
                seen |= next;
                frontier |= next;
            }
            seen == set
        })
        .count()
}

fn connected_subsets(s: &Seeds) -> Result<Vec<Check>> {
    let graphs: Vec<Result<(f64, usize, usize)>> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = s.stream(i);
            let m = rng.random_range(1..=12usize);
            let q = rng.random_range(0.05..0.9);
            let mut adj = vec![0u32; m];
            let mut edges = Vec::new();
            for a in 0..m {
                for b in a + 1..m {
                    if rng.random::<f64>() < q {
                        edges.push((a, b));
                        adj[a] |= 1 << b;
                        adj[b] |= 1 << a;
                    }
                }
            }
            let g = GraphView::from_edges(m, &edges)?;
            let d = g.max_degree();
            let (mut worst, mut mismatches, mut cases) = (0.0f64, 0, 0);
            for k in 1..=m {
                let count = enumerate_connected_subsets(&g, k)?.len();
                if count != brute_force_count(m, &adj, k) {
                    mismatches += 1;
                }
                let bound = connected_subset_bound(m, d, k);
                worst = worst.max(if count == 0 { 0.0 } else { count as f64 / bound });
                cases += 1;
            }
            Ok((worst, mismatches, cases))
        })
        .collect();
    let (mut worst, mut mismatches, mut cases) = (0.0f64, 0, 0);
    for g in graphs {
        let (w, mm, c) = g?;
        worst = worst.max(w);
        mismatches += mm;
        cases += c;
    }
    Ok(vec![
        Check::at_most("max count / bound", worst, 1.0),
        Check::at_most("enumeration mismatches", mismatches as f64, 0.0),
        Check::info("cases", cases as f64),
    ])
}

fn exp_moment() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for rw in [0.5, 1.0, 2.0] {
        let d = Dist::weibull(rw)?;
        let r = 1.0 / rw;
        let c1 = moment_growth_constant(&d, r, 1024.0)?;
        let eta = exp_moment_eta(c1, r);
        let v = subexp_integral(&d, eta, r)?;
        checks.push(Check::at_most(format!("weibull({rw}) E exp(eta|X|^(1/r))"), v, exp_moment_bound(c1)));
    }
    Ok(checks)
}

fn orlicz_gaussian(s: &Seeds) -> Result<Vec<Check>> {
    let ratios: Vec<Result<Vec<f64>>> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = s.stream(i);
            let g = Dist::gaussian();
            let a = Coeff::from_fn(8, |_, _| g.sample(&mut rng))?;
            let frob = a.row_norms().iter().map(|r| r * r).sum::<f64>().sqrt();
            [1.0, 2.0, 4.0, 8.0]
                .iter()
                .map(|&p| {
                    let b = Budget::uniform(p, g.tail_profile())?;
                    Ok(max_linear(&a, &b)?.objective / (p.sqrt() * frob))
                })
                .collect()
        })
        .collect();
    let mut all = Vec::new();
    for r in ratios {
        all.extend(r?);
    }
    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
    let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        Check::at_least("min value / (sqrt(p) |a|_2)", min, 0.5),
        Check::at_most("max value / (sqrt(p) |a|_2)", max, 2.0),
    ])
}

fn sandwich_catalog(s: &Seeds) -> Result<Vec<(String, Coeff)>> {
    let n = 8;
    let mut out = Vec::new();
    for gen in GENERATOR_NAMES {
        out.push((gen.to_string(), named(gen, n, s.seed)?));
    }
    let mut rng = s.stream(0);
    let g = Dist::gaussian();
    let mut upper = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            upper[i * n + j] = g.sample(&mut rng);
        }
    }
    out.push((
        "gaussian-symmetric".into(),
        Coeff::from_fn(n, |i, j| upper[i.min(j) * n + i.max(j)])?,
    ));
    out.push(("signs".into(), random_signs(n, &mut rng)));
    out.push(("first-row".into(), Coeff::from_fn(n, |i, j| if i == 0 { (j + 1) as f64 } else { 0.0 })?));
    Ok(out)
}

fn r_sandwich(s: &Seeds) -> Result<Vec<Check>> {
    let catalog = sandwich_catalog(s)?;
    let laws = [Dist::gaussian(), Dist::weibull(0.5)?, Dist::weibull(1.0)?];
    let cases: Vec<(usize, &(String, Coeff), &Dist)> = catalog
        .iter()
        .flat_map(|c| laws.iter().map(move |d| (c, d)))
        .enumerate()
        .map(|(i, (c, d))| (i, c, d))
        .collect();
    let results: Vec<Result<(f64, f64)>> = cases
        .par_iter()
        .map(|&(i, (_, a), d)| {
            let ens = Ens::uniform(a.clone(), d.clone()).normalized(1.0)?;
            let cfg = BoundConfig {
                seed: s.child(i as u64),
                analytic: true,
                ..Default::default()
            };
            let r = r_estimate(&ens, &cfg)?;
            let an = r.analytic_lower.ok_or_else(|| anyhow::anyhow!("analytic side missing"))?;
            let slack = loglog_factor::<f64>(a.n(), 0.5);
            Ok((an / r.lower, r.lower / (slack * an)))
        })
        .collect();
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for r in results {
        let (a, b) = r?;
        up = up.max(a);
        down = down.max(b);
    }
    Ok(vec![
        Check::info("max analytic / estimate", up),
        Check::info("max estimate / (sqrt(LogLog n) analytic)", down),
        Check::at_most("fitted constant", up.max(down).max(1.0), 1e3),
    ])
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub const MAIN_SCALING_NS: [usize; 5] = [16, 32, 64, 128, 256];

/// Bound settings for the scaling sweep: greedy removal only and a lighter
/// supremum search.
pub fn scaling_config(seed: u64) -> BoundConfig {
    BoundConfig {
        n_samples: 1000,
        seed,
        analytic: false,
        ascent: AscentConfig {
            n_starts: 4,
            max_iters: 25,
            batch: 1000,
            tol: 1e-5,
            ..AscentConfig::default()
        },
        removal: RemovalConfig {
            exhaustive_limit: 0.0,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn main_scaling(s: &Seeds) -> Result<Vec<Check>> {
    let laws = [Dist::rademacher(), Dist::gaussian(), Dist::weibull(1.0)?];
    let mut checks = Vec::new();
    let mut fitted = 0.0f64;
    for (g, gen) in GENERATOR_NAMES.iter().enumerate() {
        for (l, law) in laws.iter().enumerate() {
            let (mut lower, mut residual) = (Vec::new(), Vec::new());
            for (k, &n) in MAIN_SCALING_NS.iter().enumerate() {
                let ens = Ens::uniform(named(gen, n, s.seed)?, law.clone());
                let cfg = scaling_config(s.child(((g * 8 + l) * 8 + k) as u64));
                let rep = bound_report(&ens, gen, &cfg)?;
                let emp = rep.empirical.mean;
                lower.push((rep.m + rep.d) / emp);
                residual.push(emp / (rep.m + rep.r_lower));
            }
            let tag = format!("{gen} {}", law.label());
            fitted = fitted.max(lower.iter().copied().fold(0.0, f64::max));
            checks.push(Check::at_most(
                format!("{tag} (M+D)/E ratio n=256 over n=16"),
                lower[lower.len() - 1] / lower[0],
                2.0,
            ));
            let y: Vec<f64> = residual.iter().map(|r| r.ln()).collect();
            let ln_n: Vec<f64> = MAIN_SCALING_NS.iter().map(|&n| (n as f64).ln()).collect();
            let lnln_n: Vec<f64> = ln_n.iter().map(|v| v.ln()).collect();
            checks.push(Check::at_most(format!("{tag} E/(M+R) slope vs ln n"), slope(&ln_n, &y), 0.2));
            checks.push(Check::info(format!("{tag} E/(M+R) slope vs ln ln n"), slope(&lnln_n, &y)));
        }
    }
    checks.push(Check::at_most("fitted lower constant", fitted, 1e3));
    Ok(checks)
}

fn product_decomposition(s: &Seeds) -> Result<Vec<Check>> {
    let d = Dist::weibull(0.5)?;
    let dec = product_decompose(&d, 2)?;
    let fit = product_tail_domination(&dec, &d, 1_000_000, 0.999, 1e3, s.child(0))?;
    let mut checks = vec![Check::at_most("tail domination constant", fit.c.unwrap_or(f64::INFINITY), 1e3)];
    let ratios: Vec<Result<f64>> = (1..=50u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = s.stream(i);
            let dim = rng.random_range(2..=8usize);
            let size = rng.random_range(2..=6usize);
            let g = Dist::gaussian();
            let points: Vec<Vec<f64>> = (0..size).map(|_| (0..dim).map(|_| g.sample(&mut rng)).collect()).collect();
            let x = expected_finite_sup(&points, 100_000, s.child(2 * i), |r| d.sample(r))?;
            let y = expected_finite_sup(&points, 100_000, s.child(2 * i + 1), |r| dec.sample_product(r))?;
            Ok(x / y)
        })
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for r in ratios {
        let r = r?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    checks.push(Check::at_least("min sup ratio", lo, 1.0 / 8.0));
    checks.push(Check::at_most("max sup ratio", hi, 8.0));
    Ok(checks)
}

const UPPER_NS: [usize; 4] = [8, 16, 32, 64];

/// Largest `empirical / bound` over the generator suite, with the bound
/// `quarter_log_bound` or, given `r`, `weibull_bound(r)`.
fn fitted_upper(s: &Seeds, law: Dist, r: Option<f64>) -> Result<Vec<Check>> {
    let mut fitted = 0.0f64;
    for (g, gen) in GENERATOR_NAMES.iter().enumerate() {
        for (k, &n) in UPPER_NS.iter().enumerate() {
            let a = named(gen, n, s.seed)?;
            let bound = match r {
                Some(r) => weibull_bound(&a, r)?,
                None => quarter_log_bound(&a),
            };
            let est = estimate_op_mean(&Ens::uniform(a, law.clone()), 2000, s.child((g * 16 + k) as u64))?;
            fitted = fitted.max(est.mean / bound);
        }
    }
    let name = match r {
        Some(r) => format!("weibull({r}) fitted constant"),
        None => "rademacher fitted constant".to_string(),
    };
    Ok(vec![Check::at_most(name, fitted, 10.0)])
}

fn weibull_upper(s: &Seeds) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (i, r) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let sub = Seeds {
            seed: s.child(i as u64 + 1000),
            id: s.id,
        };
        checks.extend(fitted_upper(&sub, Dist::weibull(r)?, Some(r))?);
    }
    Ok(checks)
}

fn da_bound_band(s: &Seeds) -> Result<Vec<Check>> {
    let mut ratios = Vec::new();
    for (k, n) in [16usize, 32, 64, 128].into_iter().enumerate() {
        let ens = Ens::uniform(named("band", n, 0)?, Dist::gaussian()).normalized(1.0)?;
        let cfg = BoundConfig {
            analytic: false,
            seed: s.child(k as u64),
            ..Default::default()
        };
        let rep = bound_report(&ens, "band", &cfg)?;
        if rep.d_a != 2 {
            bail!("band matrix has d_A = {}", rep.d_a);
        }
        ratios.push(rep.empirical.mean / rep.da_upper);
    }
    Ok(vec![
        Check::at_most("fitted constant", ratios.iter().copied().fold(0.0, f64::max), 10.0),
        Check::at_most("ratio spread over n", spread(&ratios), 2.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 1.0).collect();
        assert!((slope(&x, &y) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn brute_force_counts_on_a_path() {
        // Path 0-1-2-3: connected k-sets are the 4-k+1 intervals.
        let adj = [0b0010, 0b0101, 0b1010, 0b0100];
        for k in 1..=4 {
            assert_eq!(brute_force_count(4, &adj, k), 5 - k);
        }
    }

    #[test]
    fn checks_respect_windows() {
        assert!(Check::within("x", 1.0, Some(0.5), Some(2.0)).pass);
        assert!(!Check::at_most("x", 3.0, 2.0).pass);
        assert!(!Check::at_least("x", f64::NAN, 0.0).pass);
        assert!(Check::info("x", f64::INFINITY).pass);
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        let e = run_suite("no-such-suite", 0).unwrap_err();
        assert!(matches!(e.downcast_ref::<CliError>(), Some(CliError::Usage(_))));
    }

    #[test]
    fn exp_moment_suite_passes() {
        let r = run_suite("exp-moment", 0).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.checks.len(), 3);
    }
}
