use crate::matrix::{norm2, Matrix};
use crate::rng::{domain, substream};
use crate::scalar::Real;

use rand_distr::{Distribution, StandardNormal};

/// Matrices up to this size use the exact dense decomposition.
pub const EXACT_MAX_DIM: usize = 64;

/// Fixed sparsity pattern in compressed-row form; values are supplied per call.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Row of each stored entry, in storage order.
    row_of: Vec<usize>,
}

impl Pattern {
    /// Pattern from `(i, j)` positions sorted row-major.
    pub fn from_positions(rows: usize, cols: usize, pos: &[(usize, usize)]) -> Self {
        let mut row_ptr = vec![0; rows + 1];
        for &(i, _) in pos {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        debug_assert!(pos.windows(2).all(|w| w[0] < w[1]), "positions must be sorted row-major");
        Self {
            rows,
            cols,
            row_ptr,
            col_idx: pos.iter().map(|p| p.1).collect(),
            row_of: pos.iter().map(|p| p.0).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_dense<T: Real>(&self, vals: &[T]) -> Matrix<T> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (k, (&i, &j)) in self.row_of.iter().zip(&self.col_idx).enumerate() {
            m.set(i, j, vals[k]);
        }
        m
    }

    fn mul<T: Real>(&self, vals: &[T], x: &[T], y: &mut [T]) {
        for i in 0..self.rows {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc = acc + vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    fn mul_t<T: Real>(&self, vals: &[T], y: &[T], z: &mut [T]) {
        z.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..self.rows {
            let yi = y[i];
            if yi == T::zero() {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                z[j] = z[j] + vals[k] * yi;
            }
        }
    }
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm<T: Real>(m: &Matrix<T>, tol: T) -> T {
    if m.rows().max(m.cols()) <= EXACT_MAX_DIM {
        return m.singular_values().first().copied().unwrap_or_else(T::zero);
    }
    let mut pos = Vec::new();
    let mut vals = Vec::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m.get(i, j);
            if v != T::zero() {
                pos.push((i, j));
                vals.push(v);
            }
        }
    }
    spectral_norm_sparse(&Pattern::from_positions(m.rows(), m.cols(), &pos), &vals, tol)
}

/// Largest singular value of the matrix with the given pattern and values.
///
/// Exact for dimensions up to [`EXACT_MAX_DIM`]; otherwise Golub-Kahan
/// bidiagonalization with full reorthogonalization from a fixed pseudo-random
/// start, stopping when the top Ritz value changes by less than `tol`
/// (relative) three steps in a row. Ritz values never exceed the true norm,
/// and the iteration is exact once it spans the row space.
pub fn spectral_norm_sparse<T: Real>(pat: &Pattern, vals: &[T], tol: T) -> T {
    if vals.iter().all(|&v| v == T::zero()) {
        return T::zero();
    }
    let dim = pat.rows.max(pat.cols);
    if dim <= EXACT_MAX_DIM {
        return pat.to_dense(vals).singular_values()[0];
    }
    lanczos_top(pat, vals, tol)
}

fn orthogonalize<T: Real>(x: &mut [T], basis: &[Vec<T>]) {
    // Two passes keep the basis orthogonal to working precision.
    for _ in 0..2 {
        for b in basis {
            let c: T = b.iter().zip(x.iter()).map(|(&u, &v)| u * v).sum();
            x.iter_mut().zip(b).for_each(|(v, &u)| *v = *v - c * u);
        }
    }
}

/// Largest singular value of the upper bidiagonal matrix with diagonal
/// `alpha` and superdiagonal `beta`, by bisection on the Sturm count of the
/// Golub-Kahan form `[[0, B], [Bᵀ, 0]]`.
fn bidiagonal_top<T: Real>(alpha: &[T], beta: &[T]) -> T {
    let mut c = Vec::with_capacity(2 * alpha.len());
    for (i, &a) in alpha.iter().enumerate() {
        c.push(a);
        if i + 1 < alpha.len() {
            c.push(beta[i]);
        }
    }
    let mut hi = T::zero();
    for i in 0..=c.len() {
        let left = if i > 0 { c[i - 1].abs() } else { T::zero() };
        let right = if i < c.len() { c[i].abs() } else { T::zero() };
        hi = hi.max(left + right);
    }
    let tiny = T::min_positive_value();
    // Number of eigenvalues of the zero-diagonal tridiagonal above x.
    let above = |x: T| -> usize {
        let mut q = -x;
        let mut neg = usize::from(q < T::zero());
        for &ci in &c {
            if q.abs() < tiny {
                q = -tiny;
            }
            q = -x - ci * ci / q;
            if q < T::zero() {
                neg += 1;
            }
        }
        c.len() + 1 - neg
    };
    let mut lo = T::zero();
    for _ in 0..200 {
        if hi - lo <= T::epsilon() * hi {
            break;
        }
        let mid = (lo + hi) / T::lit(2.0);
        if above(mid) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn lanczos_top<T: Real>(pat: &Pattern, vals: &[T], tol: T) -> T {
    let mut rng = substream(0, domain::POWER_START, pat.cols as u64);
    let mut v: Vec<T> = (0..pat.cols)
        .map(|_| T::lit(StandardNormal.sample(&mut rng)))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let steps = pat.rows.min(pat.cols);
    let scale = vals.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let breakdown = T::epsilon() * scale * T::lit(steps as f64);
    let (mut us, mut vs): (Vec<Vec<T>>, Vec<Vec<T>>) = (Vec::new(), Vec::new());
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut u = vec![T::zero(); pat.rows];
    let mut w = vec![T::zero(); pat.cols];
    let (mut prev, mut streak) = (T::zero(), 0);
    for _ in 0..steps {
        pat.mul(vals, &v, &mut u);
        if let (Some(b), Some(last)) = (beta.last(), us.last()) {
            let b: T = *b;
            u.iter_mut().zip(last as &Vec<T>).for_each(|(x, &y)| *x = *x - b * y);
        }
        orthogonalize(&mut u, &us);
        let a = norm2(&u);
        vs.push(v.clone());
        if a <= breakdown {
            if !beta.is_empty() {
                alpha.push(T::zero());
            }
            break;
        }
        u.iter_mut().for_each(|x| *x = *x / a);
        alpha.push(a);
        pat.mul_t(vals, &u, &mut w);
        w.iter_mut().zip(&v).for_each(|(x, &y)| *x = *x - a * y);
        orthogonalize(&mut w, &vs);
        us.push(u.clone());
        let sigma = bidiagonal_top(&alpha, &beta);
        if (sigma - prev).abs() <= tol * sigma {
            streak += 1;
        } else {
            streak = 0;
        }
        prev = sigma;
        let b = norm2(&w);
        if streak >= 3 || b <= breakdown {
            break;
        }
        beta.push(b);
        v = w.iter().map(|&x| x / b).collect();
    }
    if alpha.is_empty() {
        // Start orthogonal to the row space; the norm is at most the largest
        // column norm, which a basis start attains when the column is alone.
        return pat.to_dense(vals).singular_values()[0];
    }
    bidiagonal_top(&alpha, &beta[..alpha.len() - 1])
}

/// Power-iteration estimate of the top singular triplet `(σ, u, v)` with unit
/// `u`, `v` and `σ = uᵀ M v`. Meant for warm starts, not certified values.
pub fn top_singular_triplet_sparse<T: Real>(pat: &Pattern, vals: &[T], max_iters: usize) -> (T, Vec<T>, Vec<T>) {
    let mut rng = substream(1, domain::POWER_START, pat.cols as u64);
    let mut x: Vec<T> = (0..pat.cols)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            T::lit(g.abs())
        })
        .collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v = *v / nx);
    let mut y = vec![T::zero(); pat.rows];
    let mut prev = T::zero();
    for _ in 0..max_iters {
        pat.mul(vals, &x, &mut y);
        let rho = norm2(&y);
        if rho == T::zero() {
            break;
        }
        pat.mul_t(vals, &y, &mut x);
        let nz = norm2(&x);
        x.iter_mut().for_each(|v| *v = *v / nz);
        if (rho - prev).abs() <= T::tol(1e-10) * rho {
            break;
        }
        prev = rho;
    }
    pat.mul(vals, &x, &mut y);
    let sigma = norm2(&y);
    if sigma > T::zero() {
        y.iter_mut().for_each(|v| *v = *v / sigma);
    }
    (sigma, y, x)
}
