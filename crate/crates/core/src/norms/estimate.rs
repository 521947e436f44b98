use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::Ensemble;
use super::spectral::spectral_norm_sparse;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{domain, mean_and_stderr, substream, Stream};
use crate::scalar::{log_sum_exp, Real};

/// Default relative tolerance for sampled spectral norms.
pub const SAMPLE_NORM_TOL: f64 = 1e-7;

/// Monte Carlo estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct EstimateResult<T: Real> {
    pub mean: T,
    pub stderr: T,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<T>,
    /// Wall time in seconds.
    pub elapsed: f64,
}

/// `(a_ij X_ij)` with fresh draws for the nonzero coefficients.
pub fn sample_hadamard<T: Real>(ens: &Ensemble<T>, rng: &mut Stream) -> Matrix<T> {
    let draws = ens.entries();
    let mut vals = vec![T::zero(); draws.len()];
    draws.draw_values(rng, &mut vals);
    draws.pattern.to_dense(&vals)
}

/// Operator norms of `n_samples` independent draws, in sample order.
///
/// Draw `s` uses the stream `(seed, HADAMARD, s)`, so the values do not
/// depend on how the work is split across threads.
pub fn sample_op_norms<T: Real>(ens: &Ensemble<T>, n_samples: usize, seed: u64) -> Vec<T> {
    let draws = ens.entries();
    let tol = T::tol(SAMPLE_NORM_TOL);
    (0..n_samples)
        .into_par_iter()
        .map_init(
            || vec![T::zero(); draws.len()],
            |vals, s| {
                let mut rng = substream(seed, domain::HADAMARD, s as u64);
                draws.draw_values(&mut rng, vals);
                spectral_norm_sparse(&draws.pattern, vals, tol)
            },
        )
        .collect()
}

/// `E‖(a_ij X_ij)‖_op` by Monte Carlo.
pub fn estimate_op_mean<T: Real>(ens: &Ensemble<T>, n_samples: usize, seed: u64) -> Result<EstimateResult<T>> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("n_samples={n_samples} must be >= 2")));
    }
    let start = Instant::now();
    let norms = sample_op_norms(ens, n_samples, seed);
    let (mean, stderr) = mean_and_stderr(&norms);
    Ok(EstimateResult {
        mean,
        stderr,
        n_samples,
        seed,
        p: None,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// `(E‖(a_ij X_ij)‖_op^p)^(1/p)` by Monte Carlo; the standard error is the
/// delta-method error of the p-th root.
pub fn estimate_op_moment<T: Real>(ens: &Ensemble<T>, p: T, n_samples: usize, seed: u64) -> Result<EstimateResult<T>> {
    if !(p >= T::one()) {
        return Err(Error::InvalidArgument(format!("p={p} must be >= 1")));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("n_samples={n_samples} must be >= 2")));
    }
    let start = Instant::now();
    let norms = sample_op_norms(ens, n_samples, seed);
    let max = norms.iter().copied().fold(T::zero(), T::max);
    if max == T::zero() {
        return Ok(EstimateResult {
            mean: T::zero(),
            stderr: T::zero(),
            n_samples,
            seed,
            p: Some(p),
            elapsed: start.elapsed().as_secs_f64(),
        });
    }
    // Work with (x / max)^p to stay in range.
    let scaled: Vec<T> = norms.iter().map(|&x| (x / max).powf(p)).collect();
    let (m, se) = mean_and_stderr(&scaled);
    let mean = max * m.powf(T::one() / p);
    let stderr = mean * se / (p * m);
    Ok(EstimateResult {
        mean,
        stderr,
        n_samples,
        seed,
        p: Some(p),
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// `max_ij |a_ij| ‖X_ij‖_p`.
pub fn max_entry_moment<T: Real>(ens: &Ensemble<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::InvalidArgument(format!("p={p} must be >= 1")));
    }
    let mut best = T::zero();
    for (i, j, a) in ens.coeffs().support() {
        best = best.max(a.abs() * ens.dist(i, j).moment_p(p)?);
    }
    Ok(best)
}

/// `(mean |s|^p)^(1/p)` computed in log space; `Overflow` if any `|s|` is
/// not finite.
pub fn empirical_p_norm<T: Real>(s: &[T], p: T) -> Result<T> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("non-finite bilinear sample".into()));
    }
    let ln_terms = s.iter().map(|&x| p * x.abs().ln());
    let ln_mean = log_sum_exp(ln_terms) - T::lit(s.len() as f64).ln();
    if ln_mean == T::neg_infinity() {
        return Ok(T::zero());
    }
    let v = (ln_mean / p).exp();
    if !v.is_finite() {
        return Err(Error::Overflow(format!("p={p} moment exceeds the float range")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistSpec;
    use crate::matgraph::CoeffMatrix;

    fn ens(a: CoeffMatrix<f64>, d: DistSpec<f64>) -> Ensemble<f64> {
        Ensemble::uniform(a, d)
    }

    fn identity(n: usize) -> CoeffMatrix<f64> {
        CoeffMatrix::from_fn(n, |i, j| f64::from(u8::from(i == j))).unwrap()
    }

    #[test]
    fn identity_rademacher_is_exactly_one() {
        let r = estimate_op_mean(&ens(identity(8), DistSpec::rademacher()), 200, 1).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.p, None);
    }

    #[test]
    fn identity_gaussian_matches_max_of_gaussians() {
        let r = estimate_op_mean(&ens(identity(64), DistSpec::gaussian()), 4000, 5).unwrap();
        assert!((2.2..=3.2).contains(&r.mean), "{}", r.mean);
        // E max_i |g_i| = ∫ 1 - erf(t/√2)^64 dt.
        let h = 1e-4;
        let oracle: f64 = (0..100_000)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                h * (1.0 - statrs::function::erf::erf(t / 2f64.sqrt()).powi(64))
            })
            .sum();
        assert!((r.mean - oracle).abs() <= 3.0 * r.stderr, "{} vs {oracle} ± {}", r.mean, r.stderr);
    }

    #[test]
    fn hadamard_samples() {
        let z = ens(CoeffMatrix::zeros(3).unwrap(), DistSpec::gaussian());
        let mut rng = substream(1, 0, 0);
        assert_eq!(sample_hadamard(&z, &mut rng).max_abs(), 0.0);
        let a = CoeffMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0]]).unwrap();
        let m = sample_hadamard(&ens(a.clone(), DistSpec::rademacher()), &mut rng);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.get(i, j).abs(), a.get(i, j).abs());
            }
        }
        let g = ens(a, DistSpec::gaussian());
        let m1 = sample_hadamard(&g, &mut substream(4, 0, 0));
        let m2 = sample_hadamard(&g, &mut substream(4, 0, 0));
        assert_eq!(m1, m2);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let a: CoeffMatrix<f64> = crate::matgraph::GenSpec::Circulant { n: 80, width: None }.build().unwrap();
        let e = ens(a, DistSpec::weibull(1.0).unwrap());
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_op_mean(&e, 50, 77).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn entry_moments() {
        let e = ens(identity(55), DistSpec::gaussian());
        let v = max_entry_moment(&e, 4.0).unwrap();
        assert!((v - 3f64.powf(0.25)).abs() < 1e-12);
        let r = ens(CoeffMatrix::from_rows(&[vec![0.5, -3.0], vec![1.0, 0.0]]).unwrap(), DistSpec::rademacher());
        assert_eq!(max_entry_moment(&r, 7.0).unwrap(), 3.0);
        let z = ens(CoeffMatrix::zeros(4).unwrap(), DistSpec::gaussian());
        assert_eq!(max_entry_moment(&z, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn op_moment_at_one_is_the_mean() {
        let e = ens(CoeffMatrix::from_fn(3, |_, _| 1.0).unwrap(), DistSpec::gaussian());
        let m = estimate_op_mean(&e, 500, 3).unwrap();
        let p = estimate_op_moment(&e, 1.0, 500, 3).unwrap();
        assert!((m.mean - p.mean).abs() < 1e-12 * m.mean);
        let p4 = estimate_op_moment(&e, 4.0, 500, 3).unwrap();
        assert!(p4.mean >= p.mean);
        assert_eq!(p4.p, Some(4.0));
    }

    #[test]
    fn empirical_norm_is_stable_for_large_p() {
        let s = [1e3f64, -2e3, 5e2];
        let v = empirical_p_norm(&s, 400.0).unwrap();
        let expect = 2e3 * (1.0f64 / 3.0).powf(1.0 / 400.0);
        assert!((v - expect).abs() < 1e-9 * expect);
        assert!(matches!(empirical_p_norm(&[f64::INFINITY], 2.0), Err(Error::Overflow(_))));
    }
}
