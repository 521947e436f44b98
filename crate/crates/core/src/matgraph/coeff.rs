use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{domain, substream};
use crate::scalar::Real;

/// Relative tolerance behind the `symmetric` flag.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Square coefficient matrix `A = (a_ij)` with a verified symmetry flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
#[serde(try_from = "Matrix<T>", into = "Matrix<T>")]
pub struct CoeffMatrix<T: Real> {
    a: Matrix<T>,
    symmetric: bool,
}

impl<T: Real> TryFrom<Matrix<T>> for CoeffMatrix<T> {
    type Error = Error;
    fn try_from(m: Matrix<T>) -> Result<Self> {
        Self::new(m)
    }
}

impl<T: Real> From<CoeffMatrix<T>> for Matrix<T> {
    fn from(c: CoeffMatrix<T>) -> Self {
        c.a
    }
}

impl<T: Real> CoeffMatrix<T> {
    pub fn new(a: Matrix<T>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Dimension(format!("coefficient matrix must be square, got {}x{}", a.rows(), a.cols())));
        }
        if a.rows() == 0 {
            return Err(Error::Dimension("coefficient matrix must have n >= 1".into()));
        }
        if !a.is_finite() {
            return Err(Error::InvalidArgument("coefficient matrix has non-finite entries".into()));
        }
        let symmetric = asymmetry(&a) <= T::lit(SYMMETRY_TOL) * a.max_abs();
        Ok(Self { a, symmetric })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        Self::new(Matrix::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(Matrix::zeros(n, n))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn asymmetry(&self) -> T {
        asymmetry(&self.a)
    }

    pub fn max_abs(&self) -> T {
        self.a.max_abs()
    }

    pub fn row_norms(&self) -> Vec<T> {
        self.a.row_norms()
    }

    pub fn col_norms(&self) -> Vec<T> {
        self.a.col_norms()
    }

    /// Entries with `a_ij != 0`, row-major.
    pub fn support(&self) -> Vec<(usize, usize, T)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if v != T::zero() {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn abs(&self) -> Self {
        Self {
            a: self.a.map(T::abs),
            symmetric: self.symmetric,
        }
    }

    /// Copy with rows and columns in `keep` retained and all others zeroed.
    pub fn restricted_to(&self, keep: &[bool]) -> Self {
        let n = self.n();
        let a = Matrix::from_fn(n, n, |i, j| if keep[i] && keep[j] { self.get(i, j) } else { T::zero() });
        Self {
            a,
            symmetric: self.symmetric,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n() {
            let row: Vec<String> = self.a.row(i).iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Dense CSV: one row per line, comma separated, no header.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("line {}: {e}", line + 1)))?;
            let line_no = rec.position().map_or(line as u64 + 1, |p| p.line());
            let mut row = Vec::with_capacity(rec.len());
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!("line {line_no}, field {}: cannot parse {field:?} as a number", col + 1))
                })?;
                row.push(T::lit(v));
            }
            if let Some(first) = rows.first().map(|r: &Vec<T>| r.len()) {
                if row.len() != first {
                    return Err(Error::Parse(format!(
                        "line {line_no}: {} fields, expected {first}",
                        row.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.len() != rows.first().map_or(0, Vec::len) {
            return Err(Error::Parse(format!(
                "matrix must be square: {} rows of {} fields",
                rows.len(),
                rows.first().map_or(0, Vec::len)
            )));
        }
        Self::from_rows(&rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(f)
    }
}

fn asymmetry<T: Real>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut m = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            m = m.max((a.get(i, j) - a.get(j, i)).abs());
        }
    }
    m
}

/// Named coefficient-matrix generators.
///
/// JSON form: `{"gen":"band","n":16,"width":1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gen", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenSpec {
    Identity {
        n: usize,
    },
    Ones {
        n: usize,
    },
    /// `a_ij = 1` for `|i - j| <= width`.
    Band {
        n: usize,
        #[serde(default = "default_width")]
        width: usize,
    },
    /// Symmetric 0/1 pattern, each `i <= j` present with probability `q`
    /// (default `3/n`).
    SparseBernoulli {
        n: usize,
        #[serde(default)]
        q: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    /// `a_ij = 1/(1+d)` for cyclic distance `d <= width` (default `ceil(log2 n)`).
    Circulant {
        n: usize,
        #[serde(default)]
        width: Option<usize>,
    },
}

fn default_width() -> usize {
    1
}

/// Generator names accepted by [`GenSpec::named`].
pub const GENERATOR_NAMES: [&str; 5] = ["identity", "ones", "band", "sparse_bernoulli", "circulant"];

impl GenSpec {
    /// Default-parameter generator by name.
    pub fn named(name: &str, n: usize, seed: u64) -> Result<Self> {
        Ok(match name {
            "identity" => Self::Identity { n },
            "ones" => Self::Ones { n },
            "band" => Self::Band { n, width: 1 },
            "sparse_bernoulli" => Self::SparseBernoulli { n, q: None, seed },
            "circulant" => Self::Circulant { n, width: None },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown generator {other:?}; expected one of {GENERATOR_NAMES:?}"
                )))
            }
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn n(&self) -> usize {
        match *self {
            Self::Identity { n }
            | Self::Ones { n }
            | Self::Band { n, .. }
            | Self::SparseBernoulli { n, .. }
            | Self::Circulant { n, .. } => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity { .. } => "identity",
            Self::Ones { .. } => "ones",
            Self::Band { .. } => "band",
            Self::SparseBernoulli { .. } => "sparse_bernoulli",
            Self::Circulant { .. } => "circulant",
        }
    }

    pub fn build<T: Real>(&self) -> Result<CoeffMatrix<T>> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidArgument("generator needs n >= 1".into()));
        }
        let one = T::one();
        let zero = T::zero();
        match *self {
            Self::Identity { .. } => CoeffMatrix::from_fn(n, |i, j| if i == j { one } else { zero }),
            Self::Ones { .. } => CoeffMatrix::from_fn(n, |_, _| one),
            Self::Band { width, .. } => CoeffMatrix::from_fn(n, |i, j| if i.abs_diff(j) <= width { one } else { zero }),
            Self::SparseBernoulli { q, seed, .. } => {
                let q = q.unwrap_or(3.0 / n as f64);
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidArgument(format!("q={q} must lie in [0, 1]")));
                }
                let mut rng = substream(seed, domain::GENERATOR, n as u64);
                let mut m = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        if rng.random::<f64>() < q {
                            m.set(i, j, one);
                            m.set(j, i, one);
                        }
                    }
                }
                CoeffMatrix::new(m)
            }
            Self::Circulant { width, .. } => {
                let w = width.unwrap_or_else(|| (n as f64).log2().ceil().max(0.0) as usize);
                CoeffMatrix::from_fn(n, |i, j| {
                    let d = i.abs_diff(j);
                    let d = d.min(n - d);
                    if d <= w {
                        one / T::lit((1 + d) as f64)
                    } else {
                        zero
                    }
                })
            }
        }
    }
}
