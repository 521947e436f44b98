use crate::error::{Error, Result};
use crate::matgraph::{symmetrize, CoeffMatrix};
use crate::scalar::Real;

fn max_of<T: Real>(v: impl IntoIterator<Item = T>) -> T {
    v.into_iter().fold(T::zero(), T::max)
}

fn symmetric_view<T: Real>(a: &CoeffMatrix<T>) -> std::borrow::Cow<'_, CoeffMatrix<T>> {
    if a.is_symmetric() {
        std::borrow::Cow::Borrowed(a)
    } else {
        std::borrow::Cow::Owned(symmetrize(a))
    }
}

/// `max_i ‖row_i‖₂ + max_i r_(i) √Log i`, where `r_(1) >= r_(2) >= …` are the
/// sorted row maxima of `|a_ij|`. Non-symmetric input is replaced by its
/// block symmetrization `[[0, A], [Aᵀ, 0]]`.
pub fn gaussian_formula<T: Real>(a: &CoeffMatrix<T>) -> T {
    let s = symmetric_view(a);
    let m = s.matrix();
    let mut maxima: Vec<T> = (0..m.rows()).map(|i| max_of(m.row(i).iter().map(|x| x.abs()))).collect();
    maxima.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    let spread = max_of(
        maxima
            .iter()
            .enumerate()
            .map(|(i, &r)| r * T::lit((i + 1) as f64).log_clamped().sqrt()),
    );
    max_of(s.row_norms()) + spread
}

/// `Log^{1/4}(n) M(A)`.
pub fn quarter_log_bound<T: Real>(a: &CoeffMatrix<T>) -> T {
    T::lit(a.n() as f64).log_clamped().powf(T::lit(0.25)) * crate::matgraph::m_of(a)
}

/// `max_i ‖row_i‖₂ + Log^{1/r}(n) max |a_ij|` for `r ∈ (0, 2]`, on the block
/// symmetrization when `A` is not symmetric.
pub fn weibull_bound<T: Real>(a: &CoeffMatrix<T>, r: T) -> Result<T> {
    if !(r > T::zero() && r <= T::lit(2.0)) {
        return Err(Error::InvalidArgument(format!("weibull exponent r={r} must lie in (0, 2]")));
    }
    let s = symmetric_view(a);
    let log_n = T::lit(s.n() as f64).log_clamped();
    Ok(max_of(s.row_norms()) + log_n.powf(r.recip()) * s.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgraph::m_of;
    use crate::matrix::Matrix;

    fn coeff(rows: &[Vec<f64>]) -> CoeffMatrix<f64> {
        CoeffMatrix::from_rows(rows).unwrap()
    }

    fn identity(n: usize) -> CoeffMatrix<f64> {
        CoeffMatrix::new(Matrix::identity(n)).unwrap()
    }

    #[test]
    fn m_examples() {
        assert_eq!(m_of(&identity(5)), 2.0);
        let ones = CoeffMatrix::from_fn(9, |_, _| 1.0).unwrap();
        assert!((m_of(&ones) - 6.0f64).abs() < 1e-12);
        let a = coeff(&[vec![1.0, 2.0], vec![0.0, 0.0]]);
        assert!((m_of(&a) - (5f64.sqrt() + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_formula_examples() {
        for n in [1usize, 2, 3, 16, 100] {
            let want = 1.0 + (n as f64).max(std::f64::consts::E).ln().sqrt();
            assert!((gaussian_formula(&identity(n)) - want).abs() < 1e-12, "n={n}");
        }
        let n = 40;
        let mut d = vec![1.0; n];
        d[n / 2] = 2.0;
        let a = CoeffMatrix::new(Matrix::diag(&d)).unwrap();
        let want = 2.0 + 2f64.max((n as f64).ln().sqrt());
        assert!((gaussian_formula(&a) - want).abs() < 1e-12);
        assert_eq!(gaussian_formula(&CoeffMatrix::<f64>::zeros(4).unwrap()), 0.0);
    }

    #[test]
    fn gaussian_formula_symmetrizes() {
        let a = coeff(&[vec![0.0, 3.0], vec![0.0, 0.0]]);
        // Block rows have maxima 3, 0, 0, 3.
        let want = 3.0 + 3.0 * 2f64.max(std::f64::consts::E).ln().sqrt();
        assert!((gaussian_formula(&a) - want).abs() < 1e-12);
    }

    #[test]
    fn quarter_log_examples() {
        let want = 16f64.ln().powf(0.25) * 2.0;
        assert!((quarter_log_bound(&identity(16)) - want).abs() < 1e-12);
        assert!((want - 2.581).abs() < 1e-3);
        let a = coeff(&[vec![1.0, 2.0], vec![0.0, 0.0]]);
        assert_eq!(quarter_log_bound(&a), m_of(&a));
        let ones = CoeffMatrix::from_fn(4, |_, _| 1.0).unwrap();
        assert!((quarter_log_bound(&ones) - 4.0 * 4f64.ln().powf(0.25)).abs() < 1e-12);
        assert!((quarter_log_bound(&ones) - 4.34).abs() < 5e-3);
    }

    #[test]
    fn weibull_examples() {
        for n in [2usize, 16, 50] {
            let want = 1.0 + (n as f64).max(std::f64::consts::E).ln().sqrt();
            assert!((weibull_bound(&identity(n), 2.0).unwrap() - want).abs() < 1e-12);
        }
        let v = weibull_bound(&identity(16), 1.0).unwrap();
        assert!((v - (1.0 + 16f64.ln())).abs() < 1e-12);
        assert!((v - 3.77).abs() < 5e-3);
        assert_eq!(weibull_bound(&CoeffMatrix::<f64>::zeros(3).unwrap(), 0.5).unwrap(), 0.0);
        for r in [0.0, -1.0, 2.5, f64::NAN] {
            assert!(weibull_bound(&identity(3), r).is_err());
        }
    }
}
