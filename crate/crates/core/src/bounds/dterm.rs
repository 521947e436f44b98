use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::norms::{AscentConfig, BilinearBatch, Ensemble};
use crate::orlicz::{combinations, ln_binomial};
use crate::rng::{child_seed, domain};
use crate::scalar::Real;

/// Search settings for the removal term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalConfig {
    /// Supremum search used for every candidate removal set.
    pub ascent: AscentConfig,
    /// Enumerate every removal set of size `k` when `C(n, k)` is at most this.
    pub exhaustive_limit: f64,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        Self {
            ascent: AscentConfig {
                n_starts: 2,
                max_iters: 20,
                ..AscentConfig::light()
            },
            exhaustive_limit: 1e4,
        }
    }
}

/// One `k` of the removal term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RemovalPoint<T: Real> {
    pub k: usize,
    /// Moment order `Log k`.
    pub p: T,
    /// Supremum with the rows and columns in `removed` deleted, on independent
    /// draws.
    pub value: T,
    pub removed: Vec<usize>,
    /// True if every removal set of size `k` was tried.
    pub exhaustive: bool,
}

/// `max_k min_{|I| <= k} sup_{v,w} ‖Σ_{i,j ∉ I} a_ij X_ij v_i w_j‖_{Log k}`
/// over dyadic `k`, with the minimum taken over the sets that were tried.
///
/// The reported value can only exceed the true minimum, so it is an upper
/// approximation of the removal term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RemovalTerm<T: Real> {
    pub value: T,
    pub profile: Vec<RemovalPoint<T>>,
}

/// `1, 2, 4, …` below `n`, then `n`.
pub fn dyadic_sizes(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |&k| k.checked_mul(2))
        .take_while(|&k| k < n)
        .collect();
    if n > 0 {
        ks.push(n);
    }
    ks
}

struct Search<'a, T: Real> {
    ens: &'a Ensemble<T>,
    batch: BilinearBatch<T>,
    cfg: &'a AscentConfig,
    seed: u64,
}

impl<'a, T: Real> Search<'a, T> {
    fn new(ens: &'a Ensemble<T>, cfg: &'a AscentConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            ens,
            batch: BilinearBatch::new(ens, cfg.batch, seed)?,
            cfg,
            seed,
        })
    }

    fn sup(&self, p: T, active: &[bool]) -> Result<(T, Vec<T>, Vec<T>)> {
        let starts = self.batch.starts(self.ens, p, Some(active), self.cfg.n_starts)?;
        self.batch.best_of(&starts, p, Some(active), self.cfg)
    }

    fn report(&self, p: T, active: &[bool]) -> Result<T> {
        let (_, v, w) = self.sup(p, active)?;
        self.batch
            .evaluate_independent(&v, &w, p, Some(active), self.cfg.eval_batch, self.seed)
    }
}

fn active_without(n: usize, removed: &[usize]) -> Vec<bool> {
    let mut a = vec![true; n];
    for &i in removed {
        a[i] = false;
    }
    a
}

fn log_of<T: Real>(k: usize) -> T {
    T::lit(k as f64).log_clamped()
}

/// Removal term of `ens` for dyadic `k`.
///
/// For each `k` the removal set is either found by enumeration or taken as
/// the first `k` indices of one greedy removal order. The order is grown in
/// rounds that double the removed count: each round recomputes the maximizer
/// at the order `Log` of the next target size and deletes the indices that
/// carry most of its mass `v_i² + w_i²`.
pub fn d_of<T: Real>(ens: &Ensemble<T>, cfg: &RemovalConfig, seed: u64) -> Result<RemovalTerm<T>> {
    cfg.ascent.validate()?;
    let n = ens.n();
    let empty = ens.coeffs().support().is_empty();
    let ks = dyadic_sizes(n);
    let is_exhaustive = |k: usize| k == n || empty || ln_binomial(n, k) <= cfg.exhaustive_limit.ln();
    let greedy_max = ks.iter().copied().filter(|&k| !is_exhaustive(k)).max().unwrap_or(0);
    let order = if greedy_max > 0 {
        let chain = Search::new(ens, &cfg.ascent, child_seed(seed, domain::REMOVAL, 0))?;
        greedy_order(&chain, n, greedy_max)?
    } else {
        Vec::new()
    };
    let mut profile = Vec::new();
    for k in ks {
        let p = log_of::<T>(k);
        if k == n || empty {
            profile.push(RemovalPoint {
                k,
                p,
                value: T::zero(),
                removed: if k == n { (0..n).collect() } else { Vec::new() },
                exhaustive: true,
            });
            continue;
        }
        let search = Search::new(ens, &cfg.ascent, child_seed(seed, domain::REMOVAL, k as u64))?;
        let exhaustive = is_exhaustive(k);
        let mut removed = if exhaustive {
            let sets = combinations(n, k);
            let vals: Vec<Result<T>> = sets
                .par_iter()
                .map(|set| search.sup(p, &active_without(n, set)).map(|r| r.0))
                .collect();
            let mut best: Option<(T, usize)> = None;
            for (i, v) in vals.into_iter().enumerate() {
                let v = v?;
                if best.is_none_or(|b| v < b.0) {
                    best = Some((v, i));
                }
            }
            sets[best.map_or(0, |b| b.1)].clone()
        } else {
            order[..k].to_vec()
        };
        removed.sort_unstable();
        let value = search.report(p, &active_without(n, &removed))?;
        profile.push(RemovalPoint {
            k,
            p,
            value,
            removed,
            exhaustive,
        });
    }
    let value = profile.iter().fold(T::zero(), |m, pt| m.max(pt.value));
    Ok(RemovalTerm { value, profile })
}

fn greedy_order<T: Real>(search: &Search<'_, T>, n: usize, k: usize) -> Result<Vec<usize>> {
    let mut removed: Vec<usize> = Vec::with_capacity(k);
    while removed.len() < k {
        let target = (2 * removed.len()).max(1).min(k);
        let active = active_without(n, &removed);
        let (val, v, w) = search.sup(log_of(target), &active)?;
        let mut order: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
        if val == T::zero() {
            // Nothing left to remove; pad in index order.
            removed.extend(order.into_iter().take(k - removed.len()));
            break;
        }
        let mass = |i: usize| v[i] * v[i] + w[i] * w[i];
        order.sort_by(|&a, &b| mass(b).partial_cmp(&mass(a)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        removed.extend(order.into_iter().take(target - removed.len()));
    }
    Ok(removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistSpec;
    use crate::matgraph::CoeffMatrix;
    use crate::matrix::Matrix;
    use statrs::function::gamma::ln_gamma;

    fn identity(n: usize) -> CoeffMatrix<f64> {
        CoeffMatrix::new(Matrix::identity(n)).unwrap()
    }

    #[test]
    fn dyadic_sizes_end_at_n() {
        assert_eq!(dyadic_sizes(1), vec![1]);
        assert_eq!(dyadic_sizes(8), vec![1, 2, 4, 8]);
        assert_eq!(dyadic_sizes(10), vec![1, 2, 4, 8, 10]);
        assert!(dyadic_sizes(0).is_empty());
    }

    #[test]
    fn zero_matrix_has_zero_removal_term() {
        let e = Ensemble::uniform(CoeffMatrix::<f64>::zeros(6).unwrap(), DistSpec::gaussian());
        let d = d_of(&e, &RemovalConfig::default(), 1).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.profile.iter().all(|p| p.value == 0.0));
    }

    #[test]
    fn full_removal_is_zero() {
        let e = Ensemble::uniform(CoeffMatrix::from_fn(4, |_, _| 1.0).unwrap(), DistSpec::rademacher());
        let d = d_of(&e, &RemovalConfig::default(), 2).unwrap();
        let last = d.profile.last().unwrap();
        assert_eq!((last.k, last.value), (4, 0.0));
        assert_eq!(last.removed, vec![0, 1, 2, 3]);
    }

    #[test]
    fn rademacher_identity_is_at_most_one() {
        let e = Ensemble::uniform(identity(16), DistSpec::rademacher());
        let d = d_of(&e, &RemovalConfig::default(), 3).unwrap();
        assert!(d.value <= 1.0 + 1e-12, "{}", d.value);
        assert!(d.value >= 1.0 - 1e-12);
    }

    /// `‖g‖_p` for a standard Gaussian.
    fn gaussian_moment(p: f64) -> f64 {
        ((p / 2.0) * 2f64.ln() + ln_gamma((p + 1.0) / 2.0) - 0.5 * std::f64::consts::PI.ln()).exp().powf(1.0 / p)
    }

    #[test]
    fn gaussian_identity_matches_single_entry_moments() {
        let n = 16;
        let mut cfg = RemovalConfig::default();
        cfg.ascent.eval_batch = 200_000;
        let e = Ensemble::uniform(identity(n), DistSpec::gaussian());
        let d = d_of(&e, &cfg, 4).unwrap();
        let oracle = dyadic_sizes(n)
            .into_iter()
            .filter(|&k| k < n)
            .map(|k| gaussian_moment((k as f64).max(std::f64::consts::E).ln()))
            .fold(0.0, f64::max);
        assert!((1.0..=2.2).contains(&d.value), "{}", d.value);
        assert!((d.value / oracle - 1.0).abs() < 0.03, "{} vs {oracle}", d.value);
        for pt in &d.profile {
            assert_eq!(pt.removed.len(), pt.k);
            assert_eq!(pt.exhaustive, pt.k == n || ln_binomial(n, pt.k) <= 1e4f64.ln());
        }
    }

    #[test]
    fn greedy_removes_the_heavy_block() {
        // A heavy 2x2 block on {0, 1} plus a light diagonal elsewhere.
        let n = 24;
        let a = CoeffMatrix::from_fn(n, |i, j| match (i < 2, j < 2) {
            (true, true) => 10.0,
            _ if i == j => 1.0,
            _ => 0.0,
        })
        .unwrap();
        let e = Ensemble::uniform(a, DistSpec::rademacher());
        let cfg = RemovalConfig {
            exhaustive_limit: 1.0,
            ..Default::default()
        };
        let d = d_of(&e, &cfg, 5).unwrap();
        let k2 = d.profile.iter().find(|p| p.k == 2).unwrap();
        assert!(!k2.exhaustive);
        assert_eq!(k2.removed, vec![0, 1]);
        assert!((k2.value - 1.0f64).abs() < 1e-12);
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let e = Ensemble::uniform(CoeffMatrix::from_fn(6, |i, j| 1.0 / (1 + i + j) as f64).unwrap(), DistSpec::gaussian());
        let a = d_of(&e, &RemovalConfig::default(), 9).unwrap();
        let b = d_of(&e, &RemovalConfig::default(), 9).unwrap();
        assert_eq!(a, b);
    }
}
