use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{DistKind, TailProfile, TailSource};
use crate::error::{Error, Result};
use crate::norms::{DistGrid, Ensemble};
use crate::scalar::Real;

/// Per-entry `N̂` functions: one shared profile or one per entry (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum BudgetProfiles<T: Real> {
    Uniform(TailProfile<T>),
    PerEntry { n: usize, profiles: Vec<TailProfile<T>> },
}

/// The set `{s : Σ N̂_ij(s_ij) <= p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct OrliczBudget<T: Real> {
    p: T,
    profiles: BudgetProfiles<T>,
    /// `E|X|` the laws were normalized to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<T>,
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("budget p={p} must be finite and >= 1")));
    }
    Ok(())
}

impl<T: Real> OrliczBudget<T> {
    pub fn uniform(p: T, profile: TailProfile<T>) -> Result<Self> {
        check_p(p)?;
        let normalization = match profile.source() {
            TailSource::Law(d) => d.normalization_target(),
            TailSource::PureQuadratic => None,
        };
        Ok(Self {
            p,
            profiles: BudgetProfiles::Uniform(profile),
            normalization,
        })
    }

    pub fn per_entry(p: T, n: usize, profiles: Vec<TailProfile<T>>) -> Result<Self> {
        check_p(p)?;
        if profiles.len() != n * n {
            return Err(Error::Dimension(format!("{} profiles for n={n}", profiles.len())));
        }
        Ok(Self {
            p,
            profiles: BudgetProfiles::PerEntry { n, profiles },
            normalization: None,
        })
    }

    /// Budget built from the entry laws of an ensemble.
    pub fn from_ensemble(ens: &Ensemble<T>, p: T) -> Result<Self> {
        let mut b = match ens.grid() {
            DistGrid::Uniform(d) => Self::uniform(p, d.tail_profile())?,
            DistGrid::PerEntry(v) => Self::per_entry(p, ens.n(), v.iter().map(|d| d.tail_profile()).collect())?,
        };
        let target = ens.dist(0, 0).normalization_target();
        if target.is_some_and(|t| ens.is_normalized_to(t)) {
            b.normalization = target;
        }
        Ok(b)
    }

    pub fn with_p(&self, p: T) -> Result<Self> {
        check_p(p)?;
        Ok(Self { p, ..self.clone() })
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn normalization(&self) -> Option<T> {
        self.normalization
    }

    pub fn profiles(&self) -> &BudgetProfiles<T> {
        &self.profiles
    }

    pub fn profile(&self, i: usize, j: usize) -> &TailProfile<T> {
        match &self.profiles {
            BudgetProfiles::Uniform(t) => t,
            BudgetProfiles::PerEntry { n, profiles } => &profiles[i * n + j],
        }
    }

    /// Checks the profile table covers an `n x n` matrix.
    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match &self.profiles {
            BudgetProfiles::PerEntry { n: m, .. } if *m != n => {
                Err(Error::Dimension(format!("budget for n={m}, matrix n={n}")))
            }
            _ => Ok(()),
        }
    }

    /// One coordinate per position, sharing the precomputation when every
    /// entry has the same profile.
    pub(crate) fn coords(&self, pos: &[(usize, usize)], p: T) -> Result<Vec<Coord<'_, T>>> {
        match &self.profiles {
            BudgetProfiles::Uniform(tp) => {
                let c = Coord::new(tp, p)?;
                Ok(vec![c; pos.len()])
            }
            BudgetProfiles::PerEntry { .. } => pos.iter().map(|&(i, j)| Coord::new(self.profile(i, j), p)).collect(),
        }
    }

    /// `Σ N̂_ij(t_ij)` over the given triplets.
    pub fn cost(&self, t: &[(usize, usize, T)]) -> T {
        t.iter().map(|&(i, j, v)| self.profile(i, j).hat_n(v)).sum()
    }
}

/// Shape of the tail branch, used to pick candidate maximizers.
#[derive(Debug, Clone)]
pub(crate) enum TailShape<T> {
    /// `N̂(t) = t²` everywhere.
    Quadratic,
    /// Step function: `N` is constant on `(x_k, x_{k+1}]`; holds `|x_k| > 1`.
    Atoms(Vec<T>),
    /// `N(t) = (t / scale)^r`.
    Power { scale: T, r: T },
    /// `(t, N(t))` on a geometric grid over `(1, hi]`.
    Smooth(Arc<Vec<(T, T)>>),
}

/// One coordinate of the separable problem `max c t - λ N̂(t)` on `[0, hi]`.
#[derive(Debug, Clone)]
pub(crate) struct Coord<'a, T: Real> {
    pub prof: &'a TailProfile<T>,
    pub shape: TailShape<T>,
    /// `N̂⁻¹(p)`: the largest value the full budget can buy.
    pub hi: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cand<T> {
    pub t: T,
    pub cost: T,
    pub value: T,
}

const GRID_POINTS: usize = 96;
const GOLDEN_ITERS: usize = 48;

pub(crate) fn just_above_one<T: Real>() -> T {
    T::one() + T::epsilon() * T::lit(4.0)
}

impl<'a, T: Real> Coord<'a, T> {
    pub fn new(prof: &'a TailProfile<T>, p: T) -> Result<Self> {
        let hi = prof.hat_n_inv(p);
        if !hi.is_finite() {
            return Err(Error::Unbounded(format!("N̂ stays below {p} on an unbounded range")));
        }
        let shape = match prof.source() {
            TailSource::PureQuadratic => TailShape::Quadratic,
            TailSource::Law(d) => match (d.atoms(), d.kind()) {
                (Some(atoms), _) => {
                    let mut xs: Vec<T> = atoms.iter().map(|a| a.0.abs()).filter(|&x| x > T::one()).collect();
                    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite atoms"));
                    xs.dedup();
                    TailShape::Atoms(xs)
                }
                (None, DistKind::Weibull { r }) => TailShape::Power { scale: d.scale(), r: *r },
                _ => {
                    let a = just_above_one::<T>();
                    let ratio = if hi > a { (hi / a).ln() } else { T::zero() };
                    let grid = (0..=GRID_POINTS)
                        .map(|k| (a * (ratio * T::lit(k as f64 / GRID_POINTS as f64)).exp()).min(hi.max(a)))
                        .map(|t| (t, prof.hat_n(t)))
                        .collect();
                    TailShape::Smooth(Arc::new(grid))
                }
            },
        };
        Ok(Self { prof, shape, hi })
    }

    pub fn cost(&self, t: T) -> T {
        self.prof.hat_n(t)
    }

    /// Largest `t <= hi` with `N̂(t) <= y`.
    pub fn reach(&self, y: T) -> T {
        self.prof.hat_n_inv(y).min(self.hi)
    }

    fn cand(&self, c: T, lambda: T, t: T) -> Cand<T> {
        let cost = self.cost(t);
        let value = if lambda == T::zero() { c * t } else { c * t - lambda * cost };
        Cand { t, cost, value }
    }

    /// Maximizer of `c t - λ N̂(t)` over `[0, hi]`. Near-ties (relative
    /// `1e-13`) go to the larger cost when `prefer_high`, else the smaller.
    pub fn best(&self, c: T, lambda: T, prefer_high: bool) -> Cand<T> {
        let mut ts: Vec<T> = vec![T::zero()];
        let hi = self.hi;
        let two = T::lit(2.0);
        match &self.shape {
            TailShape::Quadratic => {
                let t = if lambda > T::zero() { (c / (two * lambda)).min(hi) } else { hi };
                ts.push(t);
                ts.push(hi);
            }
            _ => {
                let one_hi = T::one().min(hi);
                let tq = if lambda > T::zero() { (c / (two * lambda)).min(one_hi) } else { one_hi };
                ts.push(tq);
                ts.push(one_hi);
                if hi > T::one() {
                    let a = just_above_one::<T>().min(hi);
                    ts.push(a);
                    ts.push(hi);
                    match &self.shape {
                        TailShape::Atoms(xs) => ts.extend(xs.iter().copied().filter(|&x| x <= hi)),
                        TailShape::Power { scale, r } => {
                            if *r > T::one() && lambda > T::zero() {
                                let ts_ = (c * scale.powf(*r) / (lambda * *r)).powf(T::one() / (*r - T::one()));
                                if ts_.is_finite() {
                                    ts.push(ts_.max(a).min(hi));
                                }
                            }
                        }
                        TailShape::Smooth(grid) => ts.push(self.smooth_tail_max(c, lambda, grid)),
                        TailShape::Quadratic => unreachable!(),
                    }
                }
            }
        }
        let mut best = self.cand(c, lambda, ts[0]);
        for &t in &ts[1..] {
            let x = self.cand(c, lambda, t);
            let scale = best.value.abs().max(x.value.abs()).max(T::min_positive_value());
            let diff = x.value - best.value;
            if diff > T::lit(1e-13) * scale {
                best = x;
            } else if diff.abs() <= T::lit(1e-13) * scale {
                let better = if prefer_high { x.cost > best.cost } else { x.cost < best.cost };
                if better {
                    best = x;
                }
            }
        }
        best
    }

    /// Grid search plus golden refinement of the tail branch.
    fn smooth_tail_max(&self, c: T, lambda: T, grid: &[(T, T)]) -> T {
        let f = |t: T| c * t - lambda * self.cost(t);
        let g_at = |k: usize| c * grid[k].0 - lambda * grid[k].1;
        let last = grid.len() - 1;
        let (mut k, mut fk) = (0, g_at(0));
        for i in 1..=last {
            let v = g_at(i);
            if v > fk {
                k = i;
                fk = v;
            }
        }
        let (mut lo, mut hi) = (grid[k.saturating_sub(1)].0, grid[(k + 1).min(last)].0);
        if hi <= lo {
            return grid[k].0;
        }
        let g = T::lit(0.618_033_988_749_894_8);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..GOLDEN_ITERS {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            }
        }
        let t = if f1 > f2 { x1 } else { x2 };
        if f(t) >= fk {
            t
        } else {
            grid[k].0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistSpec;

    #[test]
    fn budget_validation() {
        let tp = DistSpec::<f64>::gaussian().tail_profile();
        assert!(OrliczBudget::uniform(0.5, tp.clone()).is_err());
        assert!(OrliczBudget::per_entry(2.0, 2, vec![tp.clone(); 3]).is_err());
        let b = OrliczBudget::uniform(3.0, tp).unwrap();
        assert_eq!(b.with_p(5.0).unwrap().p(), 5.0);
        assert!((b.cost(&[(0, 0, 0.5), (1, 1, -0.5)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalization_is_recorded() {
        let d = DistSpec::<f64>::weibull(1.0).unwrap().normalize(1.0).unwrap();
        let a = crate::matgraph::CoeffMatrix::from_fn(3, |_, _| 1.0).unwrap();
        let b = OrliczBudget::from_ensemble(&Ensemble::uniform(a, d), 2.0).unwrap();
        assert_eq!(b.normalization(), Some(1.0));
    }

    #[test]
    fn one_dimensional_maximizers() {
        // Pure quadratic: c t - λ t² peaks at c / 2λ.
        let q = TailProfile::<f64>::pure_quadratic();
        let c = Coord::new(&q, 9.0).unwrap();
        assert_eq!(c.hi, 3.0);
        assert_eq!(c.best(2.0, 0.5, false).t, 2.0);
        assert_eq!(c.best(2.0, 0.1, false).t, 3.0);
        // Weibull(2) tail N = t², so the maximizer is c / 2λ past 1 as well.
        let w = DistSpec::<f64>::weibull(2.0).unwrap().tail_profile();
        let c = Coord::new(&w, 16.0).unwrap();
        assert!((c.best(3.0, 0.5, false).t - 3.0).abs() < 1e-12);
        // Gaussian tail by grid and golden section against a fine scan.
        let g = DistSpec::<f64>::gaussian().tail_profile();
        let c = Coord::new(&g, 20.0).unwrap();
        let b = c.best(4.0, 0.7, false);
        let scan = (0..200_000)
            .map(|k| k as f64 * c.hi / 200_000.0)
            .map(|t| 4.0 * t - 0.7 * g.hat_n(t))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(b.value >= scan - 1e-9, "{} vs {scan}", b.value);
    }

    #[test]
    fn valid_laws_have_finite_reach() {
        let w = DistSpec::<f64>::weibull(0.5).unwrap().scaled(1e6).unwrap().tail_profile();
        assert!(Coord::new(&w, 2.0).unwrap().hi.is_finite());
        let r = DistSpec::<f64>::rademacher().tail_profile();
        assert_eq!(Coord::new(&r, 50.0).unwrap().hi, 1.0);
    }
}
