//! Estimators and bounds for the expected operator norm of random matrices
//! `(a_ij X_ij)` with independent symmetric entries whose moments grow
//! regularly.
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases at
//! the crate root fix it to `f64`.

pub mod bounds;
pub mod dist;
pub mod error;
pub mod matgraph;
pub mod matrix;
pub mod norms;
pub mod orlicz;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Dist = dist::DistSpec<f64>;
pub type Tail = dist::TailProfile<f64>;
pub type Coeff = matgraph::CoeffMatrix<f64>;
pub type Mat = matrix::Matrix<f64>;
pub type Ens = norms::Ensemble<f64>;
pub type Budget = orlicz::OrliczBudget<f64>;
pub type Report = bounds::BoundReport<f64>;
