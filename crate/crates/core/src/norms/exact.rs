use rayon::prelude::*;

use super::ensemble::Ensemble;
use crate::dist::DistSpec;
use crate::error::{Error, Result};
use crate::rng::pairwise_sum;
use crate::scalar::Real;

/// Largest number of joint atoms the exhaustive routines enumerate.
pub const EXACT_PATTERN_BUDGET: f64 = (1u64 << 20) as f64;

fn atom_tables<T: Real>(laws: &[&DistSpec<T>]) -> Result<Vec<Vec<(T, T)>>> {
    let tables: Vec<Vec<(T, T)>> = laws
        .iter()
        .map(|d| {
            d.atoms()
                .ok_or_else(|| Error::Precondition(format!("{} has no finite support", d.label())))
        })
        .collect::<Result<_>>()?;
    let count: f64 = tables.iter().map(|t| t.len() as f64).product();
    if count > EXACT_PATTERN_BUDGET {
        return Err(Error::Budget {
            what: "exhaustive pattern enumeration",
            needed: count,
            limit: EXACT_PATTERN_BUDGET,
        });
    }
    Ok(tables)
}

/// Calls `f(values, probability)` for every joint atom, in mixed-radix order,
/// and returns the probability-weighted values of `f`.
fn enumerate_weighted<T: Real>(tables: &[Vec<(T, T)>], f: impl Fn(&[T]) -> T + Sync) -> Vec<T> {
    let total: usize = tables.iter().map(Vec::len).product();
    (0..total)
        .into_par_iter()
        .map_init(
            || vec![T::zero(); tables.len()],
            |vals, mut code| {
                let mut prob = T::one();
                for (k, t) in tables.iter().enumerate() {
                    let (x, p) = t[code % t.len()];
                    code /= t.len();
                    vals[k] = x;
                    prob = prob * p;
                }
                prob * f(vals)
            },
        )
        .collect()
}

/// Exact `E‖(a_ij X_ij)‖_op` for finitely supported laws, by enumerating every
/// joint outcome of the nonzero entries.
pub fn exact_mean_discrete<T: Real>(ens: &Ensemble<T>) -> Result<T> {
    let draws = ens.entries();
    let laws: Vec<&DistSpec<T>> = draws.pos.iter().map(|&(i, j)| ens.dist(i, j)).collect();
    let tables = atom_tables(&laws)?;
    let terms = enumerate_weighted(&tables, |x| {
        let vals: Vec<T> = x.iter().zip(&draws.coeffs).map(|(&a, &b)| a * b).collect();
        draws.pattern.to_dense(&vals).singular_values()[0]
    });
    Ok(pairwise_sum(&terms))
}

/// Exact `‖Σ_k c_k X_k‖_p` for independent finitely supported `X_k`.
pub fn exact_linear_moment<T: Real>(coeffs: &[T], laws: &[DistSpec<T>], p: T) -> Result<T> {
    if coeffs.len() != laws.len() {
        return Err(Error::Dimension(format!("{} coefficients, {} laws", coeffs.len(), laws.len())));
    }
    if !(p >= T::one()) {
        return Err(Error::InvalidArgument(format!("p={p} must be >= 1")));
    }
    let refs: Vec<&DistSpec<T>> = laws.iter().collect();
    let tables = atom_tables(&refs)?;
    let terms = enumerate_weighted(&tables, |x| {
        x.iter().zip(coeffs).map(|(&a, &c)| a * c).sum::<T>().abs().powf(p)
    });
    Ok(pairwise_sum(&terms).powf(T::one() / p))
}

/// Exact `E sup_{t ∈ T} Σ_k t_k c_k X_k` for a finite set `T`.
pub fn exact_sup_expectation<T: Real>(points: &[Vec<T>], coeffs: &[T], laws: &[DistSpec<T>]) -> Result<T> {
    if points.is_empty() || points.iter().any(|t| t.len() != coeffs.len()) || coeffs.len() != laws.len() {
        return Err(Error::Dimension("points, coefficients and laws must agree in length".into()));
    }
    let refs: Vec<&DistSpec<T>> = laws.iter().collect();
    let tables = atom_tables(&refs)?;
    let terms = enumerate_weighted(&tables, |x| {
        points
            .iter()
            .map(|t| t.iter().zip(coeffs).zip(x).map(|((&tk, &c), &xk)| tk * c * xk).sum::<T>())
            .fold(T::neg_infinity(), T::max)
    });
    Ok(pairwise_sum(&terms))
}
