use crate::dgp::{SeriesPanel, SimplifiedIncomeConfig, StateKind};
use crate::error::{Error, Result};

use super::var::{fit_state_var, OUTCOME_INDEX};

fn require_binary(panel: &SeriesPanel) -> Result<()> {
    if panel.state_kind == StateKind::Binary {
        Ok(())
    } else {
        Err(Error::UnsupportedSpec("diagnostic needs a binary state".into()))
    }
}

/// Sample analogue of
/// `E[(phi(S_t) - E[phi(S_t) | S_{t-1}]) windfall(S_t) X_t^2 | S_{t-1} = s]`
/// on a simplified income panel. Nonzero values mean the state-fixed VAR
/// response differs from the LP estimand.
pub fn prop3_diagnostic(panel: &SeriesPanel, cfg: &SimplifiedIncomeConfig, s: usize) -> Result<f64> {
    require_binary(panel)?;
    if s >= 2 {
        return Err(Error::UnknownState(s));
    }
    let chain = cfg.chain()?;
    let expected_phi: f64 = (0..2).map(|n| chain.prob(s, n) * cfg.phi[n]).sum();
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 1..panel.len() {
        if panel.binary_state(t - 1) != s {
            continue;
        }
        let now = panel.binary_state(t);
        let x = panel.shock[t];
        sum += (cfg.phi[now] - expected_phi) * cfg.windfall[now] * x * x;
        count += 1;
    }
    if count == 0 {
        return Err(Error::SampleTooSmall { got: 0, need: 1 });
    }
    Ok(sum / count as f64)
}

/// Fits the one-lag, state-conditioned VAR and returns the sample mean of
/// `u_{t+1} X_t` over rows with `S_{t-1} = s`, where `u_{t+1}` is the
/// outcome-equation residual. Zero in population when the conditional
/// projection model is correctly specified.
pub fn projection_residual_moment(panel: &SeriesPanel, s: usize) -> Result<f64> {
    require_binary(panel)?;
    if s >= 2 {
        return Err(Error::UnknownState(s));
    }
    let model = fit_state_var(panel, 1, 1)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for tau in 2..panel.len() {
        if panel.binary_state(tau - 2) != s {
            continue;
        }
        let regime = &model.regimes[panel.binary_state(tau - 1)];
        let lag = &regime.lags[0];
        let fitted = regime.intercept[OUTCOME_INDEX]
            + lag[(OUTCOME_INDEX, 0)] * panel.shock[tau - 1]
            + lag[(OUTCOME_INDEX, 1)] * panel.outcome[tau - 1];
        sum += (panel.outcome[tau] - fitted) * panel.shock[tau - 1];
        count += 1;
    }
    if count == 0 {
        return Err(Error::SampleTooSmall { got: 0, need: 1 });
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_simplified_income, IncomeMode};
    use crate::oracles::{lagged_interaction_moment_closed_form, prop3_covariance_closed_form};

    #[test]
    fn prop3_moment_tracks_closed_form() {
        let cfg = SimplifiedIncomeConfig::default();
        let panel = simulate_simplified_income(&cfg, 400_000, 9).unwrap();
        for s in 0..2 {
            let m = prop3_diagnostic(&panel, &cfg, s).unwrap();
            let truth = prop3_covariance_closed_form(&cfg, s).unwrap();
            // Per-row sd is about 0.02; with ~2e5 rows per state the sampling
            // error is well below 3e-4.
            assert!((m - truth).abs() < 3e-4, "s={s}: {m} vs {truth}");
        }
    }

    #[test]
    fn equal_savings_rates_give_exact_zero() {
        let cfg = SimplifiedIncomeConfig { phi: [0.8, 0.8], ..Default::default() };
        let panel = simulate_simplified_income(&cfg, 5_000, 1).unwrap();
        assert_eq!(prop3_diagnostic(&panel, &cfg, 0).unwrap(), 0.0);
    }

    #[test]
    fn lagged_interaction_residual_moment() {
        let cfg = SimplifiedIncomeConfig { mode: IncomeMode::LaggedInteraction, ..Default::default() };
        let panel = simulate_simplified_income(&cfg, 400_000, 3).unwrap();
        let chain = cfg.chain().unwrap();
        for s in 0..2 {
            let m = projection_residual_moment(&panel, s).unwrap();
            let truth = lagged_interaction_moment_closed_form(&chain, s).unwrap();
            assert!((m - truth).abs() < 0.02, "s={s}: {m} vs {truth}");
        }
    }

    #[test]
    fn correctly_specified_process_has_small_moment() {
        // In the standard process Y_{t+1} depends on X_t only through
        // phi(S_t), which the one-lag VAR conditions on exactly.
        let cfg = SimplifiedIncomeConfig::default();
        let panel = simulate_simplified_income(&cfg, 200_000, 4).unwrap();
        for s in 0..2 {
            assert!(projection_residual_moment(&panel, s).unwrap().abs() < 0.01);
        }
    }
}
