//! Spectral norms, Monte Carlo estimates of `E‖(a_ij X_ij)‖_op`, moments of
//! bilinear forms and their supremum over the unit ball, and exhaustive
//! oracles for finitely supported laws.

mod bilinear;
mod ensemble;
mod estimate;
mod exact;
mod spectral;

pub use bilinear::{
    bilinear_moment, sup_bilinear_moment, sup_on_batch, AscentConfig, BilinearBatch, SupResult, MAX_BATCH_CELLS,
    MIN_BATCH,
};
pub use ensemble::{DistGrid, Ensemble, SupportDraws};
pub use estimate::{
    empirical_p_norm, estimate_op_mean, estimate_op_moment, max_entry_moment, sample_hadamard, sample_op_norms,
    EstimateResult, SAMPLE_NORM_TOL,
};
pub use exact::{exact_linear_moment, exact_mean_discrete, exact_sup_expectation, EXACT_PATTERN_BUDGET};
pub use spectral::{
    spectral_norm, spectral_norm_sparse, top_singular_triplet_sparse, Pattern, EXACT_MAX_DIM,
};
