use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dgp::{ComplianceGroup, GovSpendConfig, SeriesPanel};
use crate::error::{Error, Result};

/// Population state-dependent LP-IV coefficients of the government spending
/// example, with state 0 the expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormLpIv {
    /// Estimand after an expansion.
    pub beta0: f64,
    /// Recession minus expansion estimand.
    pub beta1: f64,
    /// First-stage slope after a recession.
    pub theta_x_recession: f64,
    /// Estimand after a recession.
    pub theta_iv_recession: f64,
    /// `beta1 / multiplier`.
    pub xi: f64,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn govspend_closed_form(cfg: &GovSpendConfig) -> Result<ClosedFormLpIv> {
    cfg.validate()?;
    let below = std_normal().cdf(cfg.kink);
    let above = 1.0 - below;
    let (m, d, c) = (cfg.multiplier, cfg.delta, cfg.consolidation);
    let beta0 = m * (below + above * (1.0 - d));
    let theta_x_recession = below + above * (1.0 - c);
    let theta_iv_recession = m * (below + above * (1.0 - d) * (1.0 - c)) / theta_x_recession;
    let xi = theta_iv_recession / m - beta0 / m;
    Ok(ClosedFormLpIv { beta0, beta1: xi * m, theta_x_recession, theta_iv_recession, xi })
}

/// Components of the state-dependent LP-IV estimand at instrument value `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionPoint {
    pub z: f64,
    /// Marginal effect of spending at `X(z, s)`, per state.
    pub effect: [f64; 2],
    /// Instrument weight (standard normal density).
    pub omega: f64,
    /// First-stage weight `X'(z, s) / theta_X(s)`, per state.
    pub kappa: [f64; 2],
}

/// Tabulates the three factors whose product integrates to the LP-IV
/// estimand in each state.
pub fn govspend_decomposition(cfg: &GovSpendConfig, grid: &[f64]) -> Result<Vec<DecompositionPoint>> {
    let closed = govspend_closed_form(cfg)?;
    let theta_x = [1.0, closed.theta_x_recession];
    let normal = std_normal();
    Ok(grid
        .iter()
        .map(|&z| {
            let slope = |s: usize| if s == 1 && z >= cfg.kink { 1.0 - cfg.consolidation } else { 1.0 };
            DecompositionPoint {
                z,
                effect: [0, 1].map(|s| cfg.marginal_output(cfg.spending(z, s))),
                omega: normal.pdf(z),
                kappa: [0, 1].map(|s| slope(s) / theta_x[s]),
            }
        })
        .collect())
}

/// Mean of `y1 - y0` over complier rows.
pub fn late_oracle(panel: &SeriesPanel) -> Result<f64> {
    let group = panel.latent("group")?;
    let y0 = panel.latent("y0")?;
    let y1 = panel.latent("y1")?;
    let (sum, count) = group
        .iter()
        .zip(y0.iter().zip(y1))
        .filter(|(g, _)| ComplianceGroup::from_code(**g) == Some(ComplianceGroup::Complier))
        .fold((0.0, 0usize), |(s, n), (_, (a, b))| (s + b - a, n + 1));
    if count == 0 {
        return Err(Error::NoCompliers);
    }
    Ok(sum / count as f64)
}
