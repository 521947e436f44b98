use serde::{Deserialize, Serialize};

use super::{pattern_graph, CoeffMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// `[[0, A], [Aᵀ, 0]]`.
pub fn symmetrize<T: Real>(a: &CoeffMatrix<T>) -> CoeffMatrix<T> {
    let n = a.n();
    let m = Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, false) => a.get(i, j - n),
        (false, true) => a.get(j, i - n),
        _ => T::zero(),
    });
    CoeffMatrix::new(m).expect("block matrix of a valid matrix is valid")
}

/// `M(A)`: max row ℓ₂ norm plus max column ℓ₂ norm.
pub fn m_of<T: Real>(a: &CoeffMatrix<T>) -> T {
    let max = |v: Vec<T>| v.into_iter().fold(T::zero(), T::max);
    max(a.row_norms()) + max(a.col_norms())
}

/// Split of `A` at `τ = M / Log^r(n)` into small and large entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TruncationSplit<T: Real> {
    /// Entries with `|a_ij| <= τ`.
    pub low: CoeffMatrix<T>,
    /// Entries with `|a_ij| > τ`.
    pub hat: CoeffMatrix<T>,
    pub threshold: T,
    /// Maximal degree of the support graph of `hat`.
    pub hat_degree: usize,
}

/// Splits `A` at `M / Log^r(n)`; `m = None` uses `M(A)`.
///
/// With `M >= M(A)` each row and column holds at most `Log^{2r} n` large
/// entries, which is asserted.
pub fn truncation_split<T: Real>(a: &CoeffMatrix<T>, m: Option<T>, r: T) -> Result<TruncationSplit<T>> {
    if !(r > T::zero()) {
        return Err(Error::InvalidArgument(format!("r={r} must be positive")));
    }
    let ma = m_of(a);
    let m = m.unwrap_or(ma);
    let n = a.n();
    let log_r = T::lit(n as f64).log_clamped().powf(r);
    let tau = m / log_r;
    let pick = |keep_low: bool| {
        CoeffMatrix::from_fn(n, |i, j| {
            let v = a.get(i, j);
            if (v.abs() <= tau) == keep_low {
                v
            } else {
                T::zero()
            }
        })
    };
    let low = pick(true)?;
    let hat = pick(false)?;
    let hat_degree = pattern_graph(&hat, 0.0)?.max_degree();
    if m >= ma {
        let cap = (log_r * log_r).to_f64_lossy();
        assert!(
            hat_degree as f64 <= cap * (1.0 + 1e-12),
            "large-entry degree {hat_degree} exceeds Log^(2r) n = {cap}"
        );
    }
    Ok(TruncationSplit {
        low,
        hat,
        threshold: tau,
        hat_degree,
    })
}
