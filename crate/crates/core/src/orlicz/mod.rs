//! Optimization over the budget set `{s : Σ N̂_ij(s_ij) <= p}`: linear
//! functionals, which reproduce p-th moments of linear forms, and operator
//! norms of masked coefficient matrices.

mod budget;
mod linear;
mod mask;

pub use budget::{BudgetProfiles, OrliczBudget};
pub use linear::{max_linear, OrliczSolution, BUDGET_SLACK};
pub(crate) use mask::{combinations, ln_binomial};
pub use mask::{
    mask_norm, masked_opnorm_sup, r_analytic, subset_opnorm_sup, MaskSearch, MaskedSup, RAnalytic, SubsetSup,
};
