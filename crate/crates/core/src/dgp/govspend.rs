use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{seeded_rng, SeriesPanel, StateKind};
use crate::error::{Error, Result};

/// Kinked spending multiplier with state-dependent budget consolidation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GovSpendConfig {
    /// Kink location.
    pub kink: f64,
    /// Loss of effectiveness beyond the kink.
    pub delta: f64,
    /// Share of the excess shock consolidated after a recession.
    pub consolidation: f64,
    pub multiplier: f64,
    pub p_recession: f64,
}

impl Default for GovSpendConfig {
    fn default() -> Self {
        Self { kink: 0.8, delta: 0.3, consolidation: 0.5, multiplier: 1.0, p_recession: 0.5 }
    }
}

impl GovSpendConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(unit(self.delta) && unit(self.consolidation)) {
            return Err(Error::InvalidConfig("delta and consolidation must lie in [0, 1)".into()));
        }
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(Error::InvalidConfig("multiplier must be positive".into()));
        }
        if !(self.p_recession > 0.0 && self.p_recession < 1.0) {
            return Err(Error::InvalidConfig("p_recession must lie in (0, 1)".into()));
        }
        if !self.kink.is_finite() {
            return Err(Error::InvalidConfig("kink must be finite".into()));
        }
        Ok(())
    }

    /// Spending `X` produced by instrument value `z` after state `s_prev`.
    pub fn spending(&self, z: f64, s_prev: usize) -> f64 {
        if z < self.kink || s_prev == 0 {
            z
        } else {
            z - (z - self.kink) * self.consolidation
        }
    }

    /// Output as a function of spending.
    pub fn output(&self, x: f64) -> f64 {
        if x < self.kink {
            x * self.multiplier
        } else {
            x * self.multiplier - (x - self.kink) * self.delta * self.multiplier
        }
    }

    /// Marginal effect of spending on output.
    pub fn marginal_output(&self, x: f64) -> f64 {
        if x < self.kink {
            self.multiplier
        } else {
            self.multiplier * (1.0 - self.delta)
        }
    }
}

/// i.i.d. panel: `Z_t ~ N(0,1)`, `S_t ~ Bernoulli(p_recession)`, and
/// consolidation in period `t` keyed on `S_{t-1}`.
pub fn simulate_govspend(cfg: &GovSpendConfig, len: usize, seed: u64) -> Result<SeriesPanel> {
    cfg.validate()?;
    let mut rng = seeded_rng(seed);
    let mut s_prev = usize::from(rng.random::<f64>() < cfg.p_recession);
    let mut outcome = Vec::with_capacity(len);
    let mut shock = Vec::with_capacity(len);
    let mut state = Vec::with_capacity(len);
    let mut instrument = Vec::with_capacity(len);
    for _ in 0..len {
        let z: f64 = StandardNormal.sample(&mut rng);
        let s = usize::from(rng.random::<f64>() < cfg.p_recession);
        let x = cfg.spending(z, s_prev);
        outcome.push(cfg.output(x));
        shock.push(x);
        state.push(s as f64);
        instrument.push(z);
        s_prev = s;
    }
    SeriesPanel::new(outcome, shock, state, StateKind::Binary)?.with_instrument(instrument)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_consolidation_passes_instrument_through() {
        let cfg = GovSpendConfig { consolidation: 0.0, ..Default::default() };
        let p = simulate_govspend(&cfg, 2000, 1).unwrap();
        assert_eq!(p.shock, p.instrument.unwrap());
    }

    #[test]
    fn no_inefficiency_is_linear() {
        let cfg = GovSpendConfig { delta: 0.0, multiplier: 1.7, ..Default::default() };
        let p = simulate_govspend(&cfg, 2000, 1).unwrap();
        for (y, x) in p.outcome.iter().zip(&p.shock) {
            assert_eq!(*y, 1.7 * x);
        }
    }

    #[test]
    fn consolidation_uses_previous_state() {
        let cfg = GovSpendConfig::default();
        let p = simulate_govspend(&cfg, 5000, 2).unwrap();
        let z = p.instrument.clone().unwrap();
        for t in 1..p.len() {
            assert_eq!(p.shock[t], cfg.spending(z[t], p.binary_state(t - 1)));
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(GovSpendConfig { delta: 1.0, ..Default::default() }.validate().is_err());
        assert!(GovSpendConfig { multiplier: 0.0, ..Default::default() }.validate().is_err());
        assert!(GovSpendConfig { p_recession: 0.0, ..Default::default() }.validate().is_err());
    }
}
