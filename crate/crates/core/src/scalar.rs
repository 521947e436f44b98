//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Every `Real` can represent (a rounding of)
    /// every finite `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `Log(x) = ln(max(x, e))`.
    #[inline]
    fn log_clamped(self) -> Self {
        self.max(Self::E()).ln()
    }

    /// Relative tolerance that is meaningful at this precision: `max(tol, 64 eps)`.
    #[inline]
    fn tol(tol: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `Log(x) = ln(max(x, e))` on plain `f64`, used by integer-indexed formulas.
#[inline]
pub fn log_clamped_f64(x: f64) -> f64 {
    x.max(std::f64::consts::E).ln()
}

/// Numerically stable `ln(sum(exp(x_i)))`.
pub fn log_sum_exp<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let xs: Vec<T> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_is_clamped_below_at_one() {
        assert_eq!(0.5f64.log_clamped(), 1.0);
        assert_eq!(std::f64::consts::E.log_clamped(), 1.0);
        assert!((16f64.log_clamped() - 16f64.ln()).abs() < 1e-15);
        assert_eq!(log_clamped_f64(2.0), 1.0);
    }

    #[test]
    fn log_sum_exp_handles_large_inputs() {
        let v = log_sum_exp([1000.0f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
    }
}
