use serde::{Deserialize, Serialize};

use crate::dist::{DistSpec, Sampler};
use crate::error::{Error, Result};
use crate::matgraph::CoeffMatrix;
use crate::rng::Stream;
use crate::scalar::Real;

use super::spectral::Pattern;

/// Entry laws: one law for every entry, or one per entry (row-major, `n²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum DistGrid<T: Real> {
    Uniform(DistSpec<T>),
    PerEntry(Vec<DistSpec<T>>),
}

/// Coefficient matrix plus entry laws: the random matrix `(a_ij X_ij)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Ensemble<T: Real> {
    coeffs: CoeffMatrix<T>,
    grid: DistGrid<T>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(coeffs: CoeffMatrix<T>, grid: DistGrid<T>) -> Result<Self> {
        if let DistGrid::PerEntry(v) = &grid {
            let n = coeffs.n();
            if v.len() != n * n {
                return Err(Error::Dimension(format!("{} entry laws for a {n}x{n} matrix", v.len())));
            }
        }
        Ok(Self { coeffs, grid })
    }

    pub fn uniform(coeffs: CoeffMatrix<T>, dist: DistSpec<T>) -> Self {
        Self {
            coeffs,
            grid: DistGrid::Uniform(dist),
        }
    }

    pub fn coeffs(&self) -> &CoeffMatrix<T> {
        &self.coeffs
    }

    pub fn grid(&self) -> &DistGrid<T> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.coeffs.n()
    }

    pub fn dist(&self, i: usize, j: usize) -> &DistSpec<T> {
        match &self.grid {
            DistGrid::Uniform(d) => d,
            DistGrid::PerEntry(v) => &v[i * self.n() + j],
        }
    }

    /// Same coefficients with every law rescaled to `E|X| = target`.
    pub fn normalized(&self, target: T) -> Result<Self> {
        let grid = match &self.grid {
            DistGrid::Uniform(d) => DistGrid::Uniform(d.normalize(target)?),
            DistGrid::PerEntry(v) => DistGrid::PerEntry(v.iter().map(|d| d.normalize(target)).collect::<Result<_>>()?),
        };
        Ok(Self {
            coeffs: self.coeffs.clone(),
            grid,
        })
    }

    /// Same laws with different coefficients of the same size.
    pub fn with_coeffs(&self, coeffs: CoeffMatrix<T>) -> Result<Self> {
        if coeffs.n() != self.n() {
            return Err(Error::Dimension(format!("{} vs {}", coeffs.n(), self.n())));
        }
        Ok(Self {
            coeffs,
            grid: self.grid.clone(),
        })
    }

    /// True if every law with a nonzero coefficient has `E|X| = target`
    /// within `1e-10` relative.
    pub fn is_normalized_to(&self, target: T) -> bool {
        self.coeffs.support().iter().all(|&(i, j, _)| {
            self.dist(i, j)
                .mean_abs()
                .map(|m| (m - target).abs() <= T::tol(1e-10) * target)
                .unwrap_or(false)
        })
    }

    pub fn label(&self) -> String {
        match &self.grid {
            DistGrid::Uniform(d) => d.label(),
            DistGrid::PerEntry(_) => "per-entry".into(),
        }
    }

    /// Support entries and their samplers, in row-major order.
    pub fn entries(&self) -> SupportDraws<T> {
        let support = self.coeffs.support();
        let pos: Vec<(usize, usize)> = support.iter().map(|&(i, j, _)| (i, j)).collect();
        let pattern = Pattern::from_positions(self.n(), self.n(), &pos);
        let samplers = match &self.grid {
            DistGrid::Uniform(d) => EntrySamplers::Uniform(d.sampler()),
            DistGrid::PerEntry(_) => {
                EntrySamplers::PerEntry(support.iter().map(|&(i, j, _)| self.dist(i, j).sampler()).collect())
            }
        };
        SupportDraws {
            coeffs: support.iter().map(|e| e.2).collect(),
            pos,
            pattern,
            samplers,
        }
    }
}

#[derive(Debug, Clone)]
enum EntrySamplers<T: Real> {
    Uniform(Sampler<T>),
    PerEntry(Vec<Sampler<T>>),
}

/// Precomputed sampling plan over the nonzero coefficients.
#[derive(Debug, Clone)]
pub struct SupportDraws<T: Real> {
    pub coeffs: Vec<T>,
    pub pos: Vec<(usize, usize)>,
    pub pattern: Pattern,
    samplers: EntrySamplers<T>,
}

impl<T: Real> SupportDraws<T> {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Fills `out[k] = X_k` for every support entry, in order.
    pub fn draw_x(&self, rng: &mut Stream, out: &mut [T]) {
        match &self.samplers {
            EntrySamplers::Uniform(s) => out.iter_mut().for_each(|x| *x = s.sample(rng)),
            EntrySamplers::PerEntry(v) => out.iter_mut().zip(v).for_each(|(x, s)| *x = s.sample(rng)),
        }
    }

    /// Fills `out[k] = a_k X_k`.
    pub fn draw_values(&self, rng: &mut Stream, out: &mut [T]) {
        self.draw_x(rng, out);
        out.iter_mut().zip(&self.coeffs).for_each(|(x, &a)| *x = *x * a);
    }
}
