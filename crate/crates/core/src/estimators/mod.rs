//! Local projections, LP-IV, state-conditioned VARs and the VAR-based
//! impulse response constructions.

mod diagnostics;
mod irf;
mod lp;
mod spec;
mod var;

pub use diagnostics::{projection_residual_moment, prop3_diagnostic};
pub use irf::{mean_and_se, IrfEstimator, IrfPoint, IrfSet, IrfState};
pub use lp::{
    lp_iv_state, lp_iv_state_with, lp_linear, lp_linear_with, lp_state, lp_state_with, project_effects_on_states,
    LpOptions, LpResult, WEAK_FIRST_STAGE_RATIO,
};
pub use spec::{InteractionKind, InteractionSpec, Kernel};
pub use var::{
    fit_state_var, fit_state_var_on, irf_backshift, irf_fixed, irf_moving, VarModel, VarRegime, MIN_ROWS_PER_PARAMETER,
    OUTCOME_INDEX,
};
