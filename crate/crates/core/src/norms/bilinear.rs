use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{Ensemble, SupportDraws};
use super::estimate::empirical_p_norm;
use super::spectral::{top_singular_triplet_sparse, Pattern};
use crate::error::{Error, Result};
use crate::matrix::norm2;
use crate::rng::{domain, substream};
use crate::scalar::Real;

/// Largest frozen batch, in stored values (`batch × nonzeros`).
pub const MAX_BATCH_CELLS: usize = 1 << 24;
/// Smallest batch the memory cap may shrink a request to.
pub const MIN_BATCH: usize = 32;

/// Search settings for the supremum over `v, w` in the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub n_starts: usize,
    pub max_iters: usize,
    /// Initial step on the normalized gradient.
    pub step0: f64,
    /// Backtracking factor in `(0, 1)`.
    pub shrink: f64,
    /// Frozen common-random-numbers batch for the search.
    pub batch: usize,
    /// Independent batch for the reported value.
    pub eval_batch: usize,
    /// Stop when a full `(v, w)` sweep improves the objective by less than this
    /// (relative).
    pub tol: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            n_starts: 16,
            max_iters: 100,
            step0: 1e3,
            shrink: 0.5,
            batch: 2000,
            eval_batch: 4000,
            tol: 1e-6,
        }
    }
}

impl AscentConfig {
    /// Cheaper settings for inner loops.
    pub fn light() -> Self {
        Self {
            n_starts: 4,
            max_iters: 30,
            batch: 500,
            eval_batch: 1000,
            tol: 1e-4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument("n_starts and max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) || !(self.step0 > 0.0) || !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidArgument(format!("invalid ascent step rule {self:?}")));
        }
        if self.batch < 2 || self.eval_batch < 2 {
            return Err(Error::InvalidArgument("batches must hold at least 2 samples".into()));
        }
        Ok(())
    }
}

/// Result of the supremum search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SupResult<T: Real> {
    /// Value on the independent batch.
    pub value: T,
    /// Value on the frozen search batch.
    pub train_value: T,
    pub v: Vec<T>,
    pub w: Vec<T>,
    pub p: T,
    /// Search batch actually used after the memory cap.
    pub batch: usize,
    pub eval_batch: usize,
}

/// `(E|Σ a_ij v_i w_j X_ij|^p)^(1/p)` over `n_samples` fresh draws.
pub fn bilinear_moment<T: Real>(ens: &Ensemble<T>, v: &[T], w: &[T], p: T, n_samples: usize, seed: u64) -> Result<T> {
    check_vectors(ens.n(), v, w)?;
    if !(p >= T::one()) {
        return Err(Error::InvalidArgument(format!("p={p} must be >= 1")));
    }
    let draws = ens.entries();
    let c: Vec<T> = draws.pos.iter().map(|&(i, j)| v[i] * w[j]).collect();
    let s = sample_forms(&draws, &c, n_samples, seed, domain::BILINEAR);
    empirical_p_norm(&s, p)
}

fn check_vectors<T: Real>(n: usize, v: &[T], w: &[T]) -> Result<()> {
    if v.len() != n || w.len() != n {
        return Err(Error::Dimension(format!("vectors of length {}, {} for n={n}", v.len(), w.len())));
    }
    let lim = T::one() + T::lit(1e-12);
    if norm2(v) > lim || norm2(w) > lim {
        return Err(Error::InvalidArgument("v and w must lie in the unit ball".into()));
    }
    Ok(())
}

/// `Σ_k c_k a_k X_k` for `n` independent draws of every support entry.
fn sample_forms<T: Real>(draws: &SupportDraws<T>, c: &[T], n: usize, seed: u64, dom: u64) -> Vec<T> {
    (0..n)
        .into_par_iter()
        .map_init(
            || vec![T::zero(); draws.len()],
            |buf, b| {
                let mut rng = substream(seed, dom, b as u64);
                draws.draw_values(&mut rng, buf);
                buf.iter().zip(c).map(|(&x, &ck)| x * ck).sum()
            },
        )
        .collect()
}

/// A frozen batch of draws of `(a_ij X_ij)` over the support, shared by every
/// candidate `(v, w)` so the empirical objective is a fixed function.
pub struct BilinearBatch<T: Real> {
    n: usize,
    draws: SupportDraws<T>,
    /// `batch × m`, row `b` holds `a_k X_k` for draw `b`.
    x: Vec<T>,
    batch: usize,
    seed: u64,
}

impl<T: Real> BilinearBatch<T> {
    /// Draw `b` uses `(seed, CRN_BATCH, b)`. Requests larger than
    /// [`MAX_BATCH_CELLS`] are shrunk, but never below [`MIN_BATCH`].
    pub fn new(ens: &Ensemble<T>, batch: usize, seed: u64) -> Result<Self> {
        let draws = ens.entries();
        let m = draws.len().max(1);
        let cap = MAX_BATCH_CELLS / m;
        if cap < MIN_BATCH {
            return Err(Error::Budget {
                what: "bilinear search batch",
                needed: (MIN_BATCH * m) as f64,
                limit: MAX_BATCH_CELLS as f64,
            });
        }
        let batch = batch.min(cap);
        let m = draws.len();
        let mut x = vec![T::zero(); batch * m];
        if m > 0 {
            x.par_chunks_mut(m).enumerate().for_each(|(b, row)| {
                let mut rng = substream(seed, domain::CRN_BATCH, b as u64);
                draws.draw_values(&mut rng, row);
            });
        }
        Ok(Self {
            n: ens.n(),
            draws,
            x,
            batch,
            seed,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn pattern(&self) -> &Pattern {
        &self.draws.pattern
    }

    fn active_entries(&self, active: Option<&[bool]>) -> Vec<usize> {
        match active {
            None => (0..self.draws.len()).collect(),
            Some(mask) => self
                .draws
                .pos
                .iter()
                .enumerate()
                .filter(|(_, &(i, j))| mask[i] && mask[j])
                .map(|(k, _)| k)
                .collect(),
        }
    }

    fn forms(&self, idx: &[usize], c: &[T]) -> Vec<T> {
        let m = self.draws.len();
        if 2 * idx.len() >= m {
            let mut full = vec![T::zero(); m];
            for (&k, &ck) in idx.iter().zip(c) {
                full[k] = ck;
            }
            return (0..self.batch).map(|b| dot(&self.x[b * m..(b + 1) * m], &full)).collect();
        }
        (0..self.batch)
            .map(|b| {
                let row = &self.x[b * m..(b + 1) * m];
                idx.iter().zip(c).map(|(&k, &ck)| row[k] * ck).sum()
            })
            .collect()
    }

    /// Frozen-batch objective restricted to entries with both endpoints active.
    pub fn objective(&self, v: &[T], w: &[T], p: T, active: Option<&[bool]>) -> Result<T> {
        let idx = self.active_entries(active);
        if idx.is_empty() {
            return Ok(T::zero());
        }
        let c: Vec<T> = idx.iter().map(|&k| self.coef(k, v, w)).collect();
        empirical_p_norm(&self.forms(&idx, &c), p)
    }

    #[inline]
    fn coef(&self, k: usize, v: &[T], w: &[T]) -> T {
        let (i, j) = self.draws.pos[k];
        v[i] * w[j]
    }

    /// Gradient direction of the objective in `v` (`left = true`) or `w`.
    fn gradient(&self, idx: &[usize], s: &[T], p: T, v: &[T], w: &[T], left: bool) -> Vec<T> {
        let m = self.draws.len();
        // ω_b ∝ sign(s_b)|s_b|^(p-1), scaled by the largest |s_b| for range.
        let smax = s.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        let mut g = vec![T::zero(); self.n];
        if smax == T::zero() {
            return g;
        }
        let pm1 = p - T::one();
        let omega: Vec<T> = s
            .iter()
            .map(|&x| {
                if x == T::zero() {
                    T::zero()
                } else {
                    x.signum() * (x.abs() / smax).powf(pm1)
                }
            })
            .collect();
        let dense = 2 * idx.len() >= m;
        let mut acc = vec![T::zero(); if dense { m } else { idx.len() }];
        for (b, &o) in omega.iter().enumerate() {
            if o == T::zero() {
                continue;
            }
            let row = &self.x[b * m..(b + 1) * m];
            if dense {
                acc.iter_mut().zip(row).for_each(|(a, &x)| *a = *a + o * x);
            } else {
                for (a, &k) in acc.iter_mut().zip(idx) {
                    *a = *a + o * row[k];
                }
            }
        }
        if dense {
            acc = idx.iter().map(|&k| acc[k]).collect();
        }
        for (&k, &acc) in idx.iter().zip(&acc) {
            let (i, j) = self.draws.pos[k];
            if left {
                g[i] = g[i] + acc * w[j];
            } else {
                g[j] = g[j] + acc * v[i];
            }
        }
        g
    }

    /// Block-alternating projected gradient ascent from `(v0, w0)`.
    ///
    /// Returns the frozen-batch value and the final unit vectors.
    pub fn ascend(
        &self,
        v0: &[T],
        w0: &[T],
        p: T,
        active: Option<&[bool]>,
        cfg: &AscentConfig,
    ) -> Result<(T, Vec<T>, Vec<T>)> {
        let idx = self.active_entries(active);
        let mut v = unit_or_basis(v0, active);
        let mut w = unit_or_basis(w0, active);
        if idx.is_empty() {
            return Ok((T::zero(), v, w));
        }
        let eval = |v: &[T], w: &[T]| -> Result<(T, Vec<T>)> {
            let c: Vec<T> = idx.iter().map(|&k| self.coef(k, v, w)).collect();
            let s = self.forms(&idx, &c);
            Ok((empirical_p_norm(&s, p)?, s))
        };
        let (mut f, mut s) = eval(&v, &w)?;
        let tol = T::lit(cfg.tol);
        for _ in 0..cfg.max_iters {
            let f_start = f;
            for left in [true, false] {
                let g = self.gradient(&idx, &s, p, &v, &w, left);
                let gn = norm2(&g);
                if gn == T::zero() {
                    continue;
                }
                let cur = if left { &v } else { &w };
                let mut eta = T::lit(cfg.step0);
                for _ in 0..40 {
                    let cand: Vec<T> = cur.iter().zip(&g).map(|(&a, &d)| a + eta * d / gn).collect();
                    let cand = crate::matrix::normalized(cand);
                    let (fc, sc) = if left { eval(&cand, &w)? } else { eval(&v, &cand)? };
                    if fc >= f {
                        if left {
                            v = cand;
                        } else {
                            w = cand;
                        }
                        f = fc;
                        s = sc;
                        break;
                    }
                    eta = eta * T::lit(cfg.shrink);
                }
            }
            if f - f_start <= tol * f {
                break;
            }
        }
        Ok((f, v, w))
    }

    /// Value at `(v, w)` on `n_samples` independent draws `(seed, EVAL_BATCH, b)`.
    pub fn evaluate_independent(
        &self,
        v: &[T],
        w: &[T],
        p: T,
        active: Option<&[bool]>,
        n_samples: usize,
        seed: u64,
    ) -> Result<T> {
        let idx = self.active_entries(active);
        let mut c = vec![T::zero(); self.draws.len()];
        for &k in &idx {
            c[k] = self.coef(k, v, w);
        }
        let s = sample_forms(&self.draws, &c, n_samples, seed, domain::EVAL_BATCH);
        empirical_p_norm(&s, p)
    }

    /// Warm starts: top singular vectors of `|a_ij| ‖X_ij‖_p`, the largest
    /// single entries, then seeded random directions.
    pub fn starts(&self, ens: &Ensemble<T>, p: T, active: Option<&[bool]>, n_starts: usize) -> Result<Vec<(Vec<T>, Vec<T>)>> {
        let idx = self.active_entries(active);
        let n = self.n;
        let mut out = Vec::with_capacity(n_starts);
        let mut weight = vec![T::zero(); self.draws.len()];
        for &k in &idx {
            let (i, j) = self.draws.pos[k];
            weight[k] = self.draws.coeffs[k].abs() * ens.dist(i, j).moment_p(p)?;
        }
        let (sigma, u, v) = top_singular_triplet_sparse(&self.draws.pattern, &weight, 200);
        if sigma > T::zero() {
            out.push((u, v));
        }
        let mut ranked = idx.clone();
        ranked.sort_by(|&a, &b| weight[b].partial_cmp(&weight[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        for &k in ranked.iter().take((n_starts / 4).max(1)) {
            if out.len() >= n_starts {
                break;
            }
            let (i, j) = self.draws.pos[k];
            out.push((basis(n, i), basis(n, j)));
        }
        let mut r = 0u64;
        while out.len() < n_starts {
            let mut rng = substream(self.seed, domain::ASCENT_START, r);
            r += 1;
            let mut draw = || -> Vec<T> {
                (0..n)
                    .map(|i| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        if active.is_none_or(|a| a[i]) {
                            T::lit(g)
                        } else {
                            T::zero()
                        }
                    })
                    .collect()
            };
            let a = draw();
            let b = draw();
            out.push((crate::matrix::normalized(a), crate::matrix::normalized(b)));
        }
        Ok(out)
    }

    /// Runs [`ascend`](Self::ascend) from every start in parallel and keeps the
    /// best frozen-batch value (lowest start index on ties).
    pub fn best_of(
        &self,
        starts: &[(Vec<T>, Vec<T>)],
        p: T,
        active: Option<&[bool]>,
        cfg: &AscentConfig,
    ) -> Result<(T, Vec<T>, Vec<T>)> {
        let runs: Vec<Result<(T, Vec<T>, Vec<T>)>> = starts
            .par_iter()
            .map(|(v0, w0)| self.ascend(v0, w0, p, active, cfg))
            .collect();
        let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
        for r in runs {
            let r = r?;
            if best.as_ref().is_none_or(|b| r.0 > b.0) {
                best = Some(r);
            }
        }
        best.ok_or_else(|| Error::InvalidArgument("no ascent starts".into()))
    }
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: T = xc.remainder().iter().zip(yc.remainder()).map(|(&a, &b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for l in 0..4 {
            acc[l] = acc[l] + a[l] * b[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn basis<T: Real>(n: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); n];
    e[i] = T::one();
    e
}

fn unit_or_basis<T: Real>(x: &[T], active: Option<&[bool]>) -> Vec<T> {
    let masked: Vec<T> = x
        .iter()
        .enumerate()
        .map(|(i, &a)| if active.is_none_or(|m| m[i]) { a } else { T::zero() })
        .collect();
    if norm2(&masked) > T::zero() {
        return crate::matrix::normalized(masked);
    }
    let first = active.and_then(|m| m.iter().position(|&b| b)).unwrap_or(0);
    basis(x.len(), first)
}

/// `R_X(A, p) = sup_{v,w ∈ B₂} ‖Σ a_ij v_i w_j X_ij‖_p`, searched by
/// multi-start ascent on a frozen batch and reported on an independent one.
pub fn sup_bilinear_moment<T: Real>(ens: &Ensemble<T>, p: T, cfg: &AscentConfig, seed: u64) -> Result<SupResult<T>> {
    cfg.validate()?;
    if !(p >= T::one()) {
        return Err(Error::InvalidArgument(format!("p={p} must be >= 1")));
    }
    let batch = BilinearBatch::new(ens, cfg.batch, seed)?;
    sup_on_batch(ens, &batch, p, None, cfg, seed)
}

/// Supremum search on an existing batch, restricted to `active` vertices.
pub fn sup_on_batch<T: Real>(
    ens: &Ensemble<T>,
    batch: &BilinearBatch<T>,
    p: T,
    active: Option<&[bool]>,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<SupResult<T>> {
    let starts = batch.starts(ens, p, active, cfg.n_starts)?;
    let (train_value, v, w) = batch.best_of(&starts, p, active, cfg)?;
    let value = batch.evaluate_independent(&v, &w, p, active, cfg.eval_batch, seed)?;
    Ok(SupResult {
        value,
        train_value,
        v,
        w,
        p,
        batch: batch.batch(),
        eval_batch: cfg.eval_batch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistSpec;
    use crate::matgraph::CoeffMatrix;
    use crate::norms::exact_linear_moment;

    fn ens(a: CoeffMatrix<f64>, d: DistSpec<f64>) -> Ensemble<f64> {
        Ensemble::uniform(a, d)
    }

    #[test]
    fn single_entry_rademacher_moment_is_the_coefficient() {
        let e = ens(CoeffMatrix::from_rows(&[vec![2.5]]).unwrap(), DistSpec::rademacher());
        for p in [1.0, 2.0, 7.5] {
            assert!((bilinear_moment(&e, &[1.0], &[1.0], p, 100, 0).unwrap() - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_bilinear_moment_matches_scaled_gaussian() {
        let a = CoeffMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let e = ens(a.clone(), DistSpec::gaussian());
        let v = crate::matrix::normalized(vec![0.6, 0.3]);
        let w = crate::matrix::normalized(vec![-0.2, 0.9]);
        let mut l2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                l2 += (a.get(i, j) * v[i] * w[j]).powi(2);
            }
        }
        for p in [1.0, 3.0, 6.0] {
            let g = DistSpec::<f64>::gaussian().moment_p(p).unwrap();
            let est = bilinear_moment(&e, &v, &w, p, 1_000_000, 9).unwrap();
            assert!((est / (l2.sqrt() * g) - 1.0).abs() < 0.05, "p={p}: {est}");
        }
    }

    #[test]
    fn sign_sum_first_moment() {
        let e = ens(CoeffMatrix::from_fn(2, |_, _| 1.0).unwrap(), DistSpec::rademacher());
        let h = 0.5f64.sqrt();
        let est = bilinear_moment(&e, &[h, h], &[h, h], 1.0, 200_000, 2).unwrap();
        let exact = exact_linear_moment(&[0.5; 4], &vec![DistSpec::rademacher(); 4], 1.0).unwrap();
        assert_eq!(exact, 0.75);
        // sd of |S|/2 is below 0.6.
        assert!((est - exact).abs() < 4.0 * 0.6 / (200_000f64).sqrt());
        assert!(bilinear_moment(&e, &[1.0, 1.0], &[1.0, 0.0], 1.0, 10, 0).is_err());
    }

    #[test]
    fn sup_on_identity_rademacher_is_one() {
        let a = CoeffMatrix::from_fn(6, |i, j| f64::from(u8::from(i == j))).unwrap();
        let e = ens(a, DistSpec::rademacher());
        for p in [1.0, 2.0, 4.0] {
            let r = sup_bilinear_moment(&e, p, &AscentConfig::light(), 3).unwrap();
            assert!((r.value - 1.0).abs() < 1e-9, "p={p}: {}", r.value);
        }
    }

    #[test]
    fn sup_on_single_entry_is_its_moment() {
        let mut rows = vec![vec![0.0; 4]; 4];
        rows[0][0] = 2.0;
        let e = ens(CoeffMatrix::from_rows(&rows).unwrap(), DistSpec::weibull(1.0).unwrap());
        let p = 3.0;
        let cfg = AscentConfig {
            eval_batch: 200_000,
            ..AscentConfig::light()
        };
        let r = sup_bilinear_moment(&e, p, &cfg, 4).unwrap();
        let exact = 2.0 * DistSpec::<f64>::weibull(1.0).unwrap().moment_p(p).unwrap();
        assert!((r.value / exact - 1.0).abs() < 0.05, "{} vs {exact}", r.value);
    }

    #[test]
    fn sup_gaussian_second_moment_matches_closed_form() {
        // E(Σ a v w g)² = Σ a² v² w², maximized at a single largest entry.
        let mut rng = substream(21, 0, 0);
        use rand::Rng;
        let a = CoeffMatrix::from_fn(4, |_, _| rng.random::<f64>() * 2.0 - 1.0).unwrap();
        let e = ens(a.clone(), DistSpec::gaussian());
        let r = sup_bilinear_moment(&e, 2.0, &AscentConfig::default(), 8).unwrap();
        let oracle = a.max_abs();
        assert!(r.value >= 0.5 * oracle && r.value <= 2.0 * oracle);
        assert!((r.value / oracle - 1.0).abs() < 0.1, "{} vs {oracle}", r.value);
    }

    #[test]
    fn sup_dominates_fixed_directions() {
        let a: CoeffMatrix<f64> = crate::matgraph::GenSpec::Band { n: 8, width: 1 }.build().unwrap();
        let e = ens(a, DistSpec::weibull(1.0).unwrap());
        let p = 3.0;
        let r = sup_bilinear_moment(&e, p, &AscentConfig::default(), 6).unwrap();
        let mut rng = substream(5, 0, 0);
        for _ in 0..5 {
            let v = crate::matrix::normalized((0..8).map(|_| StandardNormal.sample(&mut rng)).collect());
            let w = crate::matrix::normalized((0..8).map(|_| StandardNormal.sample(&mut rng)).collect());
            let fixed = bilinear_moment(&e, &v, &w, p, 20_000, 1).unwrap();
            assert!(r.value >= fixed * 0.95, "{} < {fixed}", r.value);
        }
    }

    #[test]
    fn ascent_is_reproducible() {
        let a: CoeffMatrix<f64> = crate::matgraph::GenSpec::Ones { n: 5 }.build().unwrap();
        let e = ens(a, DistSpec::gaussian());
        let x = sup_bilinear_moment(&e, 2.5, &AscentConfig::light(), 1).unwrap();
        let y = sup_bilinear_moment(&e, 2.5, &AscentConfig::light(), 1).unwrap();
        assert_eq!(x, y);
    }
}
