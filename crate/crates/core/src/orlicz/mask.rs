use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::budget::{Coord, OrliczBudget};
use super::linear::BUDGET_SLACK;
use crate::error::{Error, Result};
use crate::matgraph::CoeffMatrix;
use crate::matrix::Matrix;
use crate::norms::{spectral_norm, Ensemble};
use crate::rng::{domain, substream};
use crate::scalar::Real;

/// Settings for the search over masks `|I| = p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSearch {
    /// Exhaust all masks when there are at most this many.
    pub exhaustive_limit: f64,
    pub restarts: usize,
    /// Candidate pool size is `max(pool_min, 16 p)` largest entries plus the
    /// best row and column.
    pub pool_min: usize,
    pub seed: u64,
}

impl Default for MaskSearch {
    fn default() -> Self {
        Self {
            exhaustive_limit: 1e5,
            restarts: 50,
            pool_min: 128,
            seed: 0,
        }
    }
}

/// `sup_{|I| = p} ‖(a_ij)_{(i,j) ∈ I}‖_op` on `|A|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SubsetSup<T: Real> {
    pub value: T,
    pub mask: Vec<(usize, usize)>,
    /// True when every mask was examined.
    pub exact: bool,
}

/// Operator norm of the sparse matrix given by triplets.
pub fn mask_norm<T: Real>(entries: &[(usize, usize, T)]) -> T {
    if entries.is_empty() {
        return T::zero();
    }
    let mut rows: Vec<usize> = entries.iter().map(|e| e.0).collect();
    let mut cols: Vec<usize> = entries.iter().map(|e| e.1).collect();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let mut m = Matrix::zeros(rows.len(), cols.len());
    for &(i, j, v) in entries {
        let r = rows.binary_search(&i).expect("row present");
        let c = cols.binary_search(&j).expect("col present");
        m.set(r, c, m.get(r, c) + v);
    }
    spectral_norm(&m, T::tol(1e-12))
}

pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

struct Entries<T> {
    pos: Vec<(usize, usize)>,
    val: Vec<T>,
}

impl<T: Real> Entries<T> {
    /// Support of `|A|`, largest first (ties row-major).
    fn of(a: &CoeffMatrix<T>) -> Self {
        let mut s = a.support();
        s.iter_mut().for_each(|e| e.2 = e.2.abs());
        s.sort_by(|x, y| y.2.partial_cmp(&x.2).expect("finite").then((x.0, x.1).cmp(&(y.0, y.1))));
        Self {
            pos: s.iter().map(|e| (e.0, e.1)).collect(),
            val: s.iter().map(|e| e.2).collect(),
        }
    }

    fn norm(&self, idx: &[usize]) -> T {
        let t: Vec<(usize, usize, T)> = idx.iter().map(|&k| (self.pos[k].0, self.pos[k].1, self.val[k])).collect();
        mask_norm(&t)
    }
}

pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if c[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Best `p`-entry mask of `|A|` by operator norm.
///
/// Exhaustive when `C(nnz, p)` is within `search.exhaustive_limit`; otherwise
/// a lower bound from 2-swap local search started at the `p` largest entries,
/// the heaviest row and column, and random masks from a pool of large entries.
pub fn subset_opnorm_sup<T: Real>(a: &CoeffMatrix<T>, p: usize, search: &MaskSearch) -> Result<SubsetSup<T>> {
    let n = a.n();
    if p == 0 || p > n * n {
        return Err(Error::InvalidArgument(format!("mask size p={p} must be in 1..={}", n * n)));
    }
    let e = Entries::of(a);
    let nnz = e.val.len();
    let to_mask = |idx: &[usize]| {
        let mut m: Vec<(usize, usize)> = idx.iter().map(|&k| e.pos[k]).collect();
        m.sort_unstable();
        m
    };
    if p >= nnz {
        return Ok(SubsetSup {
            value: spectral_norm(a.abs().matrix(), T::tol(1e-12)),
            mask: to_mask(&(0..nnz).collect::<Vec<_>>()),
            exact: true,
        });
    }
    if ln_binomial(nnz, p) <= search.exhaustive_limit.ln() {
        let combos = combinations(nnz, p);
        let norms: Vec<T> = combos.par_iter().map(|c| e.norm(c)).collect();
        let best = argmax_first(&norms);
        return Ok(SubsetSup {
            value: norms[best],
            mask: to_mask(&combos[best]),
            exact: true,
        });
    }

    let pool_len = nnz.min(search.pool_min.max(16 * p));
    let mut pool: Vec<usize> = (0..pool_len).collect();
    let mut starts: Vec<Vec<usize>> = vec![(0..p).collect()];
    for by_row in [true, false] {
        let mut lines: Vec<Vec<usize>> = vec![Vec::new(); n];
        for k in 0..nnz {
            let (i, j) = e.pos[k];
            let l = &mut lines[if by_row { i } else { j }];
            if l.len() < p {
                l.push(k);
            }
        }
        let sq = |l: &Vec<usize>| l.iter().map(|&k| e.val[k] * e.val[k]).sum::<T>();
        let best = lines
            .iter()
            .enumerate()
            .max_by(|x, y| sq(x.1).partial_cmp(&sq(y.1)).expect("finite").then(y.0.cmp(&x.0)))
            .map(|x| x.1.clone())
            .unwrap_or_default();
        if best.len() == p {
            pool.extend(best.iter().copied().filter(|&k| k >= pool_len));
            starts.push(best);
        }
    }
    pool.sort_unstable();
    pool.dedup();
    let randoms = search.restarts.saturating_sub(starts.len());
    for r in 0..randoms {
        let mut rng = substream(search.seed, domain::MASK_RESTART, r as u64);
        starts.push(sample(&mut rng, pool.len(), p).into_iter().map(|i| pool[i]).collect());
    }
    let results: Vec<(T, Vec<usize>)> = starts.par_iter().map(|s| local_search(&e, &pool, s.clone())).collect();
    let vals: Vec<T> = results.iter().map(|r| r.0).collect();
    let best = argmax_first(&vals);
    Ok(SubsetSup {
        value: results[best].0,
        mask: to_mask(&results[best].1),
        exact: false,
    })
}

fn argmax_first<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Best-improvement 2-swap search: replace one mask entry by one pool entry.
fn local_search<T: Real>(e: &Entries<T>, pool: &[usize], mut cur: Vec<usize>) -> (T, Vec<usize>) {
    let mut val = e.norm(&cur);
    for _ in 0..64 {
        let mut best: Option<(T, usize, usize)> = None;
        for out in 0..cur.len() {
            for &cand in pool {
                if cur.contains(&cand) {
                    continue;
                }
                let mut trial = cur.clone();
                trial[out] = cand;
                let v = e.norm(&trial);
                if v > val * (T::one() + T::lit(1e-12)) && best.is_none_or(|b| v > b.0) {
                    best = Some((v, out, cand));
                }
            }
        }
        match best {
            Some((v, out, cand)) => {
                cur[out] = cand;
                val = v;
            }
            None => break,
        }
    }
    (val, cur)
}

/// Two-sided estimate of `sup_{|I| = p} sup_{t ∈ budget} ‖(a_ij t_ij)_I‖_op`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MaskedSup<T: Real> {
    pub p: usize,
    /// Norm of the witness, recomputed.
    pub lower: T,
    pub upper: T,
    /// The best `(i, j, t_ij)` found, signs matching `a_ij`.
    pub witness: Vec<(usize, usize, T)>,
    pub witness_cost: T,
    /// Certified bound on the part with `t <= 1`.
    pub small_upper: T,
    /// Certified bound on the part with `t > 1`.
    pub big_upper: T,
    pub subset: SubsetSup<T>,
}

/// Lower bound from explicit feasible `(I, t)`, upper bound
/// `max(√Log p · lower, small + big)`.
///
/// Candidates: for every `q <= p`, the best `q`-mask of `|A|` and the `q`
/// largest entries, each with `t_ij = N̂⁻¹(p / q)`. The masks do not depend on
/// `p`, so `lower` is nondecreasing in `p`. The split bound uses
/// `‖(|a| t 1_{t<=1})_I‖ <= sup_I ‖|a|_I‖` for the small part and Frobenius
/// norms over at most `p / N(1+)` entries for the part with `t > 1`.
pub fn masked_opnorm_sup<T: Real>(
    a: &CoeffMatrix<T>,
    budget: &OrliczBudget<T>,
    p: usize,
    search: &MaskSearch,
) -> Result<MaskedSup<T>> {
    let n = a.n();
    budget.check_dim(n)?;
    if p == 0 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    let pf = T::lit(p as f64);
    let e = Entries::of(a);
    let nnz = e.val.len();
    let p_eff = p.min(n * n);
    let subset = subset_opnorm_sup(a, p_eff, search)?;
    if nnz == 0 {
        return Ok(MaskedSup {
            p,
            lower: T::zero(),
            upper: T::zero(),
            witness: Vec::new(),
            witness_cost: T::zero(),
            small_upper: T::zero(),
            big_upper: T::zero(),
            subset,
        });
    }
    let coords = e
        .pos
        .iter()
        .map(|&(i, j)| Coord::new(budget.profile(i, j), pf))
        .collect::<Result<Vec<_>>>()?;
    let index_of = |ij: (usize, usize)| e.pos.iter().position(|&x| x == ij).expect("mask entry in support");

    let mut masks: Vec<(usize, Vec<usize>)> = Vec::new();
    for q in 1..=p_eff.min(nnz) {
        let s = if q == p_eff { subset.clone() } else { subset_opnorm_sup(a, q, search)? };
        masks.push((q, s.mask.iter().map(|&ij| index_of(ij)).collect()));
        masks.push((q, (0..q).collect()));
    }
    let evaluated: Vec<(T, Vec<(usize, usize, T)>, T)> = masks
        .par_iter()
        .map(|(q, idx)| {
            let share = pf / T::lit(*q as f64);
            let w: Vec<(usize, usize, T)> = idx
                .iter()
                .map(|&k| {
                    let (i, j) = e.pos[k];
                    let t = coords[k].reach(share);
                    (i, j, if a.get(i, j) < T::zero() { -t } else { t })
                })
                .filter(|w| w.2 != T::zero())
                .collect();
            let cost = budget.cost(&w);
            let prod: Vec<(usize, usize, T)> = w.iter().map(|&(i, j, t)| (i, j, a.get(i, j) * t)).collect();
            (mask_norm(&prod), w, cost)
        })
        .filter(|x| x.2 <= pf * (T::one() + T::lit(BUDGET_SLACK)))
        .collect();
    let vals: Vec<T> = evaluated.iter().map(|x| x.0).collect();
    let (lower, witness, witness_cost) = if vals.is_empty() {
        (T::zero(), Vec::new(), T::zero())
    } else {
        evaluated[argmax_first(&vals)].clone()
    };

    let small_upper = if subset.exact {
        subset.value
    } else {
        let top: T = e.val.iter().take(p_eff).map(|&v| v * v).sum::<T>().sqrt();
        top.min(spectral_norm(a.abs().matrix(), T::tol(1e-12)))
    };
    let nu = coords.iter().map(|c| c.prof.n_right_of_one()).fold(T::infinity(), T::min);
    let q_max = if nu.is_finite() && nu > T::zero() {
        ((pf / nu).floor().to_usize().unwrap_or(usize::MAX)).min(p_eff).min(nnz)
    } else {
        0
    };
    let mut big: Vec<T> = (0..nnz).map(|k| e.val[k] * coords[k].hi).collect();
    big.sort_by(|x, y| y.partial_cmp(x).expect("finite"));
    let big_upper = big.iter().take(q_max).map(|&v| v * v).sum::<T>().sqrt();
    let upper = (T::lit(p as f64).log_clamped().sqrt() * lower).max(small_upper + big_upper);
    Ok(MaskedSup {
        p,
        lower,
        upper,
        witness,
        witness_cost,
        small_upper,
        big_upper,
        subset,
    })
}

/// Analytic sandwich for `sup_{v,w} ‖Σ a_ij v_i w_j X_ij‖_{Log n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RAnalytic<T: Real> {
    pub p: usize,
    pub lower: T,
    pub upper: T,
    pub masked: MaskedSup<T>,
}

/// [`masked_opnorm_sup`] at `p = round(Log n)`, with the upper side at least
/// `√(Log Log n)` times the lower. Entry laws must be normalized to
/// `E|X| = 1/e`.
pub fn r_analytic<T: Real>(ens: &Ensemble<T>, search: &MaskSearch) -> Result<RAnalytic<T>> {
    let target = T::one() / T::E();
    if !ens.is_normalized_to(target) {
        return Err(Error::Precondition(format!("entry laws must have E|X| = 1/e, got {}", ens.label())));
    }
    let n = ens.n();
    let log_n = T::lit(n as f64).log_clamped();
    let p = log_n.round().to_usize().unwrap_or(1).max(1);
    let budget = OrliczBudget::from_ensemble(ens, T::lit(p as f64))?;
    let masked = masked_opnorm_sup(ens.coeffs(), &budget, p, search)?;
    let upper = masked.upper.max(log_n.log_clamped().sqrt() * masked.lower);
    Ok(RAnalytic {
        p,
        lower: masked.lower,
        upper,
        masked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistSpec;

    fn ones(n: usize) -> CoeffMatrix<f64> {
        CoeffMatrix::from_fn(n, |_, _| 1.0).unwrap()
    }

    fn identity(n: usize) -> CoeffMatrix<f64> {
        CoeffMatrix::from_fn(n, |i, j| f64::from(u8::from(i == j))).unwrap()
    }

    #[test]
    fn combinations_are_complete() {
        let c = combinations(5, 3);
        assert_eq!(c.len(), 10);
        assert_eq!(c[0], vec![0, 1, 2]);
        assert_eq!(c[9], vec![2, 3, 4]);
        assert_eq!(combinations(4, 4).len(), 1);
        assert!((ln_binomial(64, 2) - 2016f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn subset_examples() {
        let s = MaskSearch::default();
        let a = CoeffMatrix::from_rows(&[vec![1.0, -5.0], vec![2.0, 0.5]]).unwrap();
        assert_eq!(subset_opnorm_sup(&a, 1, &s).unwrap().value, 5.0);
        for k in 1..=6 {
            assert!((subset_opnorm_sup(&identity(6), k, &s).unwrap().value - 1.0).abs() < 1e-12);
        }
        let four = subset_opnorm_sup(&ones(2), 4, &s).unwrap();
        assert!((four.value - 2.0).abs() < 1e-12);
        let two = subset_opnorm_sup(&ones(2), 2, &s).unwrap();
        assert!((two.value - 2f64.sqrt()).abs() < 1e-12);
        assert!(two.exact);
        assert!(subset_opnorm_sup(&ones(2), 5, &s).is_err());
    }

    #[test]
    fn local_search_matches_exhaustion_on_small_cases() {
        let heuristic = MaskSearch {
            exhaustive_limit: 0.0,
            ..MaskSearch::default()
        };
        for seed in 0..5u64 {
            let mut rng = substream(seed, 0, 0);
            use rand::Rng;
            let a = CoeffMatrix::from_fn(5, |_, _| if rng.random::<f64>() < 0.6 { rng.random::<f64>() - 0.5 } else { 0.0 })
                .unwrap();
            for p in [2, 3] {
                let ex = subset_opnorm_sup(&a, p, &MaskSearch::default()).unwrap();
                let h = subset_opnorm_sup(&a, p, &heuristic).unwrap();
                assert!(ex.exact && !h.exact);
                assert!(h.value <= ex.value * (1.0 + 1e-12));
                assert!(h.value >= 0.999 * ex.value, "seed {seed} p {p}: {} vs {}", h.value, ex.value);
            }
        }
    }

    #[test]
    fn bounded_support_reduces_to_subset_sup() {
        let a = CoeffMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.5, 1.0, 1.0], vec![0.0, 0.0, 3.0]]).unwrap();
        let b = OrliczBudget::uniform(3.0, DistSpec::rademacher().tail_profile()).unwrap();
        let m: MaskedSup<f64> = masked_opnorm_sup(&a, &b, 3, &MaskSearch::default()).unwrap();
        let s = subset_opnorm_sup(&a, 3, &MaskSearch::default()).unwrap();
        assert!((m.lower - s.value).abs() < 1e-12);
        assert_eq!(m.big_upper, 0.0);
        assert!(m.lower <= m.upper);
    }

    #[test]
    fn single_weibull_entry_gets_the_whole_budget() {
        let a = CoeffMatrix::from_rows(&[vec![1.0]]).unwrap();
        let b = OrliczBudget::uniform(4.0, DistSpec::weibull(1.0).unwrap().tail_profile()).unwrap();
        let m: MaskedSup<f64> = masked_opnorm_sup(&a, &b, 4, &MaskSearch::default()).unwrap();
        assert!((m.lower - 4.0).abs() < 1e-12);
        assert!(m.upper >= m.lower);
    }

    #[test]
    fn gaussian_identity_uses_one_large_entry() {
        let b = OrliczBudget::uniform(2.0, DistSpec::gaussian().tail_profile()).unwrap();
        let m = masked_opnorm_sup(&identity(4), &b, 2, &MaskSearch::default()).unwrap();
        // N(t) = 2 ⇔ P(|g| >= t) = e^-2.
        let oracle = 2f64.sqrt() * statrs::function::erf::erfc_inv((-2f64).exp());
        assert!((m.lower - oracle).abs() < 1e-9, "{} vs {oracle}", m.lower);
        assert_eq!(m.witness.len(), 1);
        assert!(m.witness_cost <= 2.0 * (1.0 + BUDGET_SLACK));
    }

    #[test]
    fn lower_is_monotone_in_p_and_below_upper() {
        let mut rng = substream(3, 0, 0);
        use rand::Rng;
        let a = CoeffMatrix::from_fn(6, |_, _| rng.random::<f64>() * 2.0 - 1.0).unwrap();
        for d in [DistSpec::gaussian(), DistSpec::weibull(0.5).unwrap(), DistSpec::rademacher()] {
            let b = OrliczBudget::uniform(1.0, d.normalize(1.0 / std::f64::consts::E).unwrap().tail_profile()).unwrap();
            let mut prev = 0.0;
            for p in 1..=5 {
                let m = masked_opnorm_sup(&a, &b, p, &MaskSearch::default()).unwrap();
                assert!(m.lower >= prev - 1e-12, "{}: p={p}", d.label());
                assert!(m.lower <= m.upper);
                let prod: Vec<_> = m.witness.iter().map(|&(i, j, t)| (i, j, a.get(i, j) * t)).collect();
                assert_eq!(mask_norm(&prod), m.lower);
                assert!(m.witness.len() <= p);
                prev = m.lower;
            }
        }
    }

    #[test]
    fn analytic_r_examples() {
        let s = MaskSearch::default();
        let raw = Ensemble::uniform(identity(16), DistSpec::gaussian());
        assert!(matches!(r_analytic(&raw, &s), Err(Error::Precondition(_))));
        let e_inv = 1.0 / std::f64::consts::E;
        let rad = Ensemble::uniform(identity(16), DistSpec::rademacher()).normalized(e_inv).unwrap();
        let r = r_analytic(&rad, &s).unwrap();
        assert_eq!(r.p, 3);
        assert_eq!(r.lower, 1.0);
        let g = Ensemble::uniform(identity(16), DistSpec::gaussian()).normalized(e_inv).unwrap();
        let r = r_analytic(&g, &s).unwrap();
        // Largest single entry: max(1, σ √2 erfc⁻¹(e^-3)) with σ = √(π/2)/e.
        let sigma = (std::f64::consts::PI / 2.0).sqrt() * e_inv;
        let oracle = (sigma * 2f64.sqrt() * statrs::function::erf::erfc_inv((-3f64).exp())).max(1.0);
        assert!((r.lower - oracle).abs() < 1e-9, "{} vs {oracle}", r.lower);
        assert!(r.upper >= r.lower * (16f64.ln().ln()).sqrt());
        let small = Ensemble::uniform(CoeffMatrix::from_rows(&[vec![0.5, -2.0], vec![1.0, 0.0]]).unwrap(), DistSpec::rademacher())
            .normalized(e_inv)
            .unwrap();
        let r = r_analytic(&small, &s).unwrap();
        assert_eq!(r.p, 1);
        assert_eq!(r.lower, 2.0);
    }
}
