//! Dense row-major matrices and the small exact SVD used as the reference
//! norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Matrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
            return Err(Error::Dimension(format!("row {i} has {} entries, expected {c}", row.len())));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diag(d: &[T]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn row_norms(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|&x| x * x).sum::<T>().sqrt())
            .collect()
    }

    pub fn col_norms(&self) -> Vec<T> {
        let mut acc = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (a, &x) in acc.iter_mut().zip(self.row(i)) {
                *a = *a + x * x;
            }
        }
        acc.into_iter().map(T::sqrt).collect()
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// `M x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `Mᵀ y`.
    pub fn mul_t_vec(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate().take(self.rows) {
            if yi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * yi;
            }
        }
        out
    }

    /// `vᵀ M w`.
    pub fn bilinear(&self, v: &[T], w: &[T]) -> T {
        (0..self.rows)
            .map(|i| v[i] * self.row(i).iter().zip(w).map(|(&a, &b)| a * b).sum::<T>())
            .sum()
    }

    /// Singular values in descending order (one-sided Jacobi).
    pub fn singular_values(&self) -> Vec<T> {
        jacobi(self, false).0
    }

    /// Largest singular value with unit left and right singular vectors.
    pub fn top_singular_triplet(&self) -> (T, Vec<T>, Vec<T>) {
        let (s, v) = jacobi(self, true);
        let sigma = s.first().copied().unwrap_or_else(T::zero);
        let v = v.expect("vectors requested");
        if sigma == T::zero() {
            let mut u = vec![T::zero(); self.rows];
            let mut w = vec![T::zero(); self.cols];
            if let Some(x) = u.first_mut() {
                *x = T::one();
            }
            if let Some(x) = w.first_mut() {
                *x = T::one();
            }
            return (sigma, u, w);
        }
        let u: Vec<T> = self.mul_vec(&v).into_iter().map(|x| x / sigma).collect();
        (sigma, normalized(u), normalized(v))
    }
}

pub fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().map(|&a| a * a).sum::<T>().sqrt()
}

pub fn normalized<T: Real>(mut x: Vec<T>) -> Vec<T> {
    let n = norm2(&x);
    if n > T::zero() {
        for a in &mut x {
            *a = *a / n;
        }
    }
    x
}

/// One-sided Jacobi on the columns of `M` (or of `Mᵀ` when that is narrower).
/// Returns sorted singular values and, if requested, the top right singular
/// vector of `M`.
fn jacobi<T: Real>(m: &Matrix<T>, want_vec: bool) -> (Vec<T>, Option<Vec<T>>) {
    let transposed = m.cols > m.rows;
    let work = if transposed { m.transpose() } else { m.clone() };
    let (rows, cols) = (work.rows, work.cols);
    // Column-major copy so rotations touch contiguous memory.
    let mut a: Vec<Vec<T>> = (0..cols).map(|j| (0..rows).map(|i| work.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<T>> = if want_vec && !transposed {
        (0..cols)
            .map(|j| (0..cols).map(|i| if i == j { T::one() } else { T::zero() }).collect())
            .collect()
    } else {
        Vec::new()
    };
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let (ap, aq) = (&a[p], &a[q]);
                    let mut al = T::zero();
                    let mut be = T::zero();
                    let mut ga = T::zero();
                    for k in 0..rows {
                        al = al + ap[k] * ap[k];
                        be = be + aq[k] * aq[k];
                        ga = ga + ap[k] * aq[k];
                    }
                    (al, be, ga)
                };
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = a.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                if !v.is_empty() {
                    let (lo, hi) = v.split_at_mut(q);
                    rotate(&mut lo[p], &mut hi[0], c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(T, usize)> = a.iter().enumerate().map(|(j, col)| (norm2(col), j)).collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let sv: Vec<T> = order.iter().map(|x| x.0).collect();
    if !want_vec {
        return (sv, None);
    }
    let top = order.first().map_or(0, |x| x.1);
    let vec = if transposed {
        // Columns of Mᵀ U Σ: the rotated column is σ·(right vector of M).
        normalized(a.get(top).cloned().unwrap_or_default())
    } else {
        (0..cols).map(|i| v[top][i]).collect()
    };
    (sv, Some(vec))
}

#[inline]
fn rotate<T: Real>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (xp, yq) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xp, *yq);
        *xp = c * a - s * b;
        *yq = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_singular_values() {
        let d = Matrix::diag(&[3.0f64, 4.0]);
        assert_eq!(d.singular_values()[0], 4.0);
        let h = Matrix::from_rows(&[vec![1.0f64, 1.0], vec![1.0, -1.0]]).unwrap();
        assert!((h.singular_values()[0] - 2f64.sqrt()).abs() < 1e-15);
        let ones = Matrix::from_fn(5, 5, |_, _| 1.0f64);
        assert!((ones.singular_values()[0] - 5.0).abs() < 1e-13);
    }

    #[test]
    fn rectangular_and_frobenius_identity() {
        let m = Matrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let s = m.singular_values();
        let f2: f64 = s.iter().map(|x| x * x).sum();
        assert!((f2 - m.frobenius().powi(2)).abs() < 1e-11);
        let st = m.transpose().singular_values();
        assert!((s[0] - st[0]).abs() < 1e-12);
    }

    #[test]
    fn top_triplet_attains_norm() {
        for m in [
            Matrix::from_fn(4, 4, |i, j| (i as f64 + 1.0) * (-1f64).powi(j as i32) + j as f64 * 0.3),
            Matrix::from_fn(3, 6, |i, j| ((i + 2 * j) % 4) as f64 - 1.5),
            Matrix::from_fn(6, 3, |i, j| ((i * j) % 3) as f64 + 0.1),
        ] {
            let (s, u, v) = m.top_singular_triplet();
            assert!((norm2(&u) - 1.0).abs() < 1e-12);
            assert!((norm2(&v) - 1.0).abs() < 1e-12);
            assert!((m.bilinear(&u, &v) - s).abs() < 1e-10 * s, "{s}");
        }
    }

    #[test]
    fn mul_t_vec_is_transpose_product() {
        let m = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        let y = [1.0, -2.0, 0.5];
        assert_eq!(m.mul_t_vec(&y), m.transpose().mul_vec(&y));
    }
}
