//! Seeded simulators. Every simulator is a pure function of its config,
//! sample length and seed.

mod arma;
mod dsge;
mod govspend;
mod late;
mod markov;
mod panel;
mod stvar;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use arma::simulate_arma;
pub use dsge::{
    simulate_dsge, simulate_simplified_income, solve_dsge_savings, DsgeConfig, IncomeMode, SavingsSolution,
    SimplifiedIncomeConfig,
};
pub use govspend::{simulate_govspend, GovSpendConfig};
pub use late::{simulate_late, ComplianceGroup, LateConfig};
pub use markov::{simulate_markov, MarkovChain};
pub use panel::{SeriesPanel, StateKind};
pub use stvar::{simulate_stvar, StvarConfig, StvarModel};

/// Periods simulated and discarded before the returned sample starts.
pub const BURN_IN: usize = 1000;

/// Absolute level beyond which a recursive simulation is declared explosive.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Generator used by every simulator.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn check_finite(value: f64, t: usize) -> crate::Result<()> {
    if value.is_finite() && value.abs() <= OVERFLOW_GUARD {
        Ok(())
    } else {
        Err(crate::Error::ExplosiveSimulation(t))
    }
}
