use serde::{Deserialize, Serialize};

use super::dterm::{d_of, RemovalConfig, RemovalPoint, RemovalTerm};
use super::formulas::{gaussian_formula, quarter_log_bound, weibull_bound};
use crate::dist::DistKind;
use crate::error::{Error, Result};
use crate::matgraph::{m_of, pattern_graph, symmetrize, CoeffMatrix};
use crate::norms::{estimate_op_mean, sup_bilinear_moment, AscentConfig, DistGrid, Ensemble, EstimateResult};
use crate::orlicz::{r_analytic, MaskSearch};
use crate::rng::{child_seed, domain};
use crate::scalar::Real;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Which estimate of `R_X(A)` enters the upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RSource {
    /// Supremum search over the unit ball.
    #[default]
    Bilinear,
    /// Upper side of the masked Orlicz supremum.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    /// Power of `Log Log n` (and of `Log d_A`) in the upper bounds.
    pub exponent: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub ascent: AscentConfig,
    pub removal: RemovalConfig,
    pub mask: MaskSearch,
    pub r_source: RSource,
    /// Also run the masked Orlicz supremum. Off for large sweeps.
    pub analytic: bool,
    /// Exponent of the Weibull-type bound; taken from the entry law if unset.
    pub weibull_r: Option<f64>,
    pub zero_threshold: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            exponent: 1.5,
            n_samples: 2000,
            seed: 0,
            ascent: AscentConfig {
                n_starts: 8,
                max_iters: 50,
                batch: 1000,
                tol: 1e-5,
                ..AscentConfig::default()
            },
            removal: RemovalConfig::default(),
            mask: MaskSearch::default(),
            r_source: RSource::Bilinear,
            analytic: true,
            weibull_r: None,
            zero_threshold: 0.0,
        }
    }
}

/// Estimates of `R_X(A) = sup_{v,w} ‖Σ a_ij v_i w_j X_ij‖_{Log n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RTerm<T: Real> {
    pub p: T,
    /// Value of the searched maximizer on independent draws.
    pub lower: T,
    /// `max(lower, analytic upper)`.
    pub upper: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_lower: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_upper: Option<T>,
}

impl<T: Real> RTerm<T> {
    pub fn value(&self, source: RSource) -> T {
        match source {
            RSource::Bilinear => self.lower,
            RSource::Analytic => self.upper,
        }
    }
}

/// Common `E|X|` of every law on the support, if there is one.
fn common_mean_abs<T: Real>(ens: &Ensemble<T>) -> Option<T> {
    let support = ens.coeffs().support();
    let &(i, j, _) = support.first()?;
    let m = ens.dist(i, j).mean_abs().ok()?;
    ens.is_normalized_to(m).then_some(m)
}

/// Supremum search at `p = Log n`, plus the masked Orlicz supremum when
/// `analytic` is set and every law has the same `E|X|`. The analytic values
/// are computed at `E|X| = 1/e` and scaled back.
pub fn r_estimate<T: Real>(ens: &Ensemble<T>, cfg: &BoundConfig) -> Result<RTerm<T>> {
    let p = T::lit(ens.n() as f64).log_clamped();
    let sup = sup_bilinear_moment(ens, p, &cfg.ascent, child_seed(cfg.seed, domain::BILINEAR, 0))?;
    let mut out = RTerm {
        p,
        lower: sup.value,
        upper: sup.value,
        analytic_lower: None,
        analytic_upper: None,
    };
    if cfg.analytic {
        if let Some(mean) = common_mean_abs(ens) {
            let target = T::one() / T::E();
            let ra = r_analytic(&ens.normalized(target)?, &cfg.mask)?;
            let scale = mean / target;
            out.analytic_lower = Some(ra.lower * scale);
            out.analytic_upper = Some(ra.upper * scale);
            out.upper = out.upper.max(ra.upper * scale);
        }
    }
    Ok(out)
}

/// `Log^e(Log n)`.
pub fn loglog_factor<T: Real>(n: usize, exponent: f64) -> T {
    T::lit(n as f64).log_clamped().log_clamped().powf(T::lit(exponent))
}

/// Two-sided bound on `E‖(a_ij X_ij)‖_op` with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MainBounds<T: Real> {
    /// `M(A) + D`.
    pub lower: T,
    /// `Log^e(Log n) (M(A) + R)`.
    pub upper: T,
    pub m: T,
    pub d: RemovalTerm<T>,
    pub r: RTerm<T>,
}

fn require_unit_mean<T: Real>(ens: &Ensemble<T>) -> Result<()> {
    if ens.is_normalized_to(T::one()) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("entry laws must have E|X| = 1, got {}", ens.label())))
    }
}

/// Lower `M + D` and upper `Log^e(Log n) (M + R)` with `R` from `cfg.r_source`.
/// Entry laws must have `E|X| = 1`.
pub fn main_bounds<T: Real>(ens: &Ensemble<T>, cfg: &BoundConfig) -> Result<MainBounds<T>> {
    require_unit_mean(ens)?;
    let (d, r) = rayon::join(
        || d_of(ens, &cfg.removal, child_seed(cfg.seed, domain::REMOVAL, 0)),
        || r_estimate(ens, cfg),
    );
    assemble(ens, d?, r?, cfg)
}

fn assemble<T: Real>(ens: &Ensemble<T>, d: RemovalTerm<T>, r: RTerm<T>, cfg: &BoundConfig) -> Result<MainBounds<T>> {
    let m = m_of(ens.coeffs());
    let upper = loglog_factor::<T>(ens.n(), cfg.exponent) * (m + r.value(cfg.r_source));
    Ok(MainBounds {
        lower: m + d.value,
        upper,
        m,
        d,
        r,
    })
}

/// Largest off-diagonal degree of the support graph; the block
/// symmetrization is used for non-symmetric `A`.
pub fn max_degree<T: Real>(a: &CoeffMatrix<T>, zero_threshold: f64) -> Result<usize> {
    let g = if a.is_symmetric() {
        pattern_graph(a, zero_threshold)?
    } else {
        pattern_graph(&symmetrize(a), zero_threshold)?
    };
    Ok(g.max_degree())
}

/// `Log^e(d_A) (max_i ‖row_i‖₂ + r)`, with rows of the block symmetrization
/// for non-symmetric `A`. Returns `(d_A, bound)`.
pub fn da_bound<T: Real>(a: &CoeffMatrix<T>, r: T, exponent: f64, zero_threshold: f64) -> Result<(usize, T)> {
    let d = max_degree(a, zero_threshold)?;
    let rows = a.row_norms().into_iter().chain(if a.is_symmetric() { Vec::new() } else { a.col_norms() });
    let row_max = rows.fold(T::zero(), T::max);
    let factor = T::lit(d as f64).log_clamped().powf(T::lit(exponent));
    Ok((d, factor * (row_max + r)))
}

/// Every bound quantity for one ensemble, with entry laws rescaled to
/// `E|X| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BoundReport<T: Real> {
    pub schema_version: u32,
    pub n: usize,
    pub ensemble: String,
    pub grid: DistGrid<T>,
    pub m: T,
    pub gaussian_formula: T,
    pub quarter_log: T,
    pub weibull_r: T,
    pub weibull: T,
    pub r_p: T,
    pub r_lower: T,
    pub r_upper: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_analytic_lower: Option<T>,
    pub r_source: RSource,
    pub d: T,
    pub d_profile: Vec<RemovalPoint<T>>,
    pub main_lower: T,
    pub main_upper: T,
    pub d_a: usize,
    pub da_upper: T,
    pub empirical: EstimateResult<T>,
    pub loglog_exponent_used: f64,
}

impl<T: Real> BoundReport<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn weibull_exponent<T: Real>(ens: &Ensemble<T>, cfg: &BoundConfig) -> T {
    if let Some(r) = cfg.weibull_r {
        return T::lit(r);
    }
    match ens.grid() {
        DistGrid::Uniform(d) => match d.kind() {
            DistKind::Weibull { r } if *r <= T::lit(2.0) => *r,
            _ => T::lit(2.0),
        },
        DistGrid::PerEntry(_) => T::lit(2.0),
    }
}

/// Runs every bound and the Monte Carlo mean on `ens` rescaled to `E|X| = 1`.
/// The empirical estimate, the removal term and `R` run as independent tasks.
pub fn bound_report<T: Real>(ens: &Ensemble<T>, label: &str, cfg: &BoundConfig) -> Result<BoundReport<T>> {
    let ens = ens.normalized(T::one())?;
    let a = ens.coeffs();
    let (empirical, (d, r)) = rayon::join(
        || estimate_op_mean(&ens, cfg.n_samples, cfg.seed),
        || {
            rayon::join(
                || d_of(&ens, &cfg.removal, child_seed(cfg.seed, domain::REMOVAL, 0)),
                || r_estimate(&ens, cfg),
            )
        },
    );
    let main = assemble(&ens, d?, r?, cfg)?;
    let r_used = main.r.value(cfg.r_source);
    let (d_a, da_upper) = da_bound(a, r_used, cfg.exponent, cfg.zero_threshold)?;
    let weibull_r = weibull_exponent(&ens, cfg);
    Ok(BoundReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n: ens.n(),
        ensemble: label.to_string(),
        grid: ens.grid().clone(),
        m: main.m,
        gaussian_formula: gaussian_formula(a),
        quarter_log: quarter_log_bound(a),
        weibull_r,
        weibull: weibull_bound(a, weibull_r)?,
        r_p: main.r.p,
        r_lower: main.r.lower,
        r_upper: main.r.upper,
        r_analytic_lower: main.r.analytic_lower,
        r_source: cfg.r_source,
        d: main.d.value,
        d_profile: main.d.profile,
        main_lower: main.lower,
        main_upper: main.upper,
        d_a,
        da_upper,
        empirical: empirical?,
        loglog_exponent_used: cfg.exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistSpec;
    use crate::matrix::Matrix;

    fn identity(n: usize) -> CoeffMatrix<f64> {
        CoeffMatrix::new(Matrix::identity(n)).unwrap()
    }

    fn quick() -> BoundConfig {
        BoundConfig {
            n_samples: 200,
            ascent: AscentConfig::light(),
            ..Default::default()
        }
    }

    #[test]
    fn zero_matrix_report_is_all_zero() {
        let e = Ensemble::uniform(CoeffMatrix::<f64>::zeros(5).unwrap(), DistSpec::gaussian());
        let r = bound_report(&e, "zero", &quick()).unwrap();
        for v in [
            r.m,
            r.gaussian_formula,
            r.quarter_log,
            r.weibull,
            r.r_lower,
            r.r_upper,
            r.d,
            r.main_lower,
            r.main_upper,
            r.da_upper,
            r.empirical.mean,
        ] {
            assert_eq!(v, 0.0);
        }
        let mb = main_bounds(&e.normalized(1.0).unwrap(), &quick()).unwrap();
        assert_eq!((mb.lower, mb.upper), (0.0, 0.0));
    }

    #[test]
    fn rademacher_identity_report() {
        let e = Ensemble::uniform(identity(16), DistSpec::rademacher());
        let cfg = quick();
        let r = bound_report(&e, "identity", &cfg).unwrap();
        assert_eq!(r.m, 2.0);
        assert!((r.quarter_log - 2.0 * 16f64.ln().powf(0.25)).abs() < 1e-12);
        assert_eq!(r.empirical.mean, 1.0);
        assert_eq!(r.empirical.stderr, 0.0);
        assert!(r.d <= 1.0 + 1e-12);
        assert!((r.main_lower - (2.0 + r.d)).abs() < 1e-12);
        assert!((r.r_lower - 1.0).abs() < 1e-12, "{}", r.r_lower);
        let f = 16f64.ln().ln().max(1.0).powf(1.5);
        assert!((r.main_upper - f * 3.0).abs() < 1e-9);
        assert!(r.main_upper >= r.m);
        assert!(r.r_lower <= r.r_upper * (1.0 + 1e-9));
        assert_eq!(r.d_a, 0);
        assert!((r.da_upper - 2.0).abs() < 1e-12);
    }

    #[test]
    fn main_bounds_requires_unit_mean() {
        let e = Ensemble::uniform(identity(4), DistSpec::gaussian());
        assert!(matches!(main_bounds(&e, &quick()), Err(Error::Precondition(_))));
    }

    #[test]
    fn da_bound_examples() {
        let d = CoeffMatrix::new(Matrix::diag(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(da_bound(&d, 0.5, 1.5, 0.0).unwrap(), (0, 3.5));
        let band = CoeffMatrix::from_fn(10, |i, j| if i.abs_diff(j) <= 1 { 1.0 } else { 0.0 }).unwrap();
        let (deg, v) = da_bound(&band, 1.0, 1.5, 0.0).unwrap();
        assert_eq!(deg, 2);
        assert!((v - (3f64.sqrt() + 1.0)).abs() < 1e-12);
        let ones = CoeffMatrix::from_fn(16, |_, _| 1.0).unwrap();
        let (deg, v) = da_bound(&ones, 0.7, 1.5, 0.0).unwrap();
        assert_eq!(deg, 15);
        assert!((v - 15f64.ln().powf(1.5) * 4.7).abs() < 1e-9);
        let upper = CoeffMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(da_bound(&upper, 0.0, 1.5, 0.0).unwrap(), (1, 2.0));
    }

    #[test]
    fn report_json_round_trips_exactly() {
        let a = CoeffMatrix::from_fn(6, |i, j| ((i * 7 + j * 3) % 5) as f64 / 3.0 - 0.4).unwrap();
        let e = Ensemble::uniform(a, DistSpec::weibull(1.0).unwrap());
        let r = bound_report(&e, "mixed", &quick()).unwrap();
        let json = r.to_json().unwrap();
        let back = BoundReport::<f64>::from_json(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(r.weibull_r, 1.0);
        assert!(r.r_analytic_lower.is_some());
        assert!(r.r_lower <= r.r_upper * (1.0 + 1e-9));
        assert!(r.main_upper >= r.m);
    }

    #[test]
    fn analytic_source_uses_the_upper_estimate() {
        let e = Ensemble::uniform(identity(8), DistSpec::gaussian()).normalized(1.0).unwrap();
        let bilinear = main_bounds(&e, &quick()).unwrap();
        let cfg = BoundConfig {
            r_source: RSource::Analytic,
            ..quick()
        };
        let analytic = main_bounds(&e, &cfg).unwrap();
        assert!(analytic.upper >= bilinear.upper * (1.0 - 1e-12));
        let f = loglog_factor::<f64>(8, 1.5);
        assert!((analytic.upper - f * (analytic.m + analytic.r.upper)).abs() < 1e-9);
    }
}
