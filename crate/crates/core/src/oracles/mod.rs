//! Ground-truth effects for the simulated processes, computed analytically
//! or by exhaustive enumeration.

mod income;
mod instruments;
mod stvar;

pub use income::{
    arma_true_irf, dsge_true_irf, lagged_interaction_moment_closed_form, prop3_covariance_closed_form,
    IncomeDynamics, MAX_ENUMERATION_HORIZON,
};
pub use instruments::{govspend_closed_form, govspend_decomposition, late_oracle, ClosedFormLpIv, DecompositionPoint};
pub use stvar::{effects_to_csv, stvar_effect_path, stvar_marginal_effects, stvar_marginal_effects_upto, EffectRecord};
