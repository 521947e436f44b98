//! Closed-form bounds on `E‖(a_ij X_ij)‖_op`, the removal term, the two-sided
//! bound in terms of `M(A)`, `D` and `R_X(A)`, and the assembled report.

mod dterm;
mod formulas;
mod report;

pub use dterm::{d_of, dyadic_sizes, RemovalConfig, RemovalPoint, RemovalTerm};
pub use formulas::{gaussian_formula, quarter_log_bound, weibull_bound};
pub use report::{
    bound_report, da_bound, loglog_factor, main_bounds, max_degree, r_estimate, BoundConfig, BoundReport, MainBounds,
    RSource, RTerm, REPORT_SCHEMA_VERSION,
};
pub use crate::matgraph::m_of;
