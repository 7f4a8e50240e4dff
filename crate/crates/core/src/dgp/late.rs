use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::markov::draw_index;
use super::{seeded_rng, SeriesPanel, StateKind};
use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplianceGroup {
    Complier,
    AlwaysTaker,
    NeverTaker,
}

impl ComplianceGroup {
    const ALL: [ComplianceGroup; 3] = [Self::Complier, Self::AlwaysTaker, Self::NeverTaker];

    /// Code stored in the `group` latent column.
    pub fn code(self) -> f64 {
        match self {
            Self::Complier => 0.0,
            Self::AlwaysTaker => 1.0,
            Self::NeverTaker => 2.0,
        }
    }

    pub fn from_code(code: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.code() == code)
    }

    fn treatment(self, z: bool) -> bool {
        match self {
            Self::Complier => z,
            Self::AlwaysTaker => true,
            Self::NeverTaker => false,
        }
    }
}

/// Cross-section with a randomly assigned binary instrument and three
/// compliance groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LateConfig {
    pub p_complier: f64,
    pub p_always: f64,
    pub p_never: f64,
    pub effect_complier: f64,
    pub effect_always: f64,
    pub effect_never: f64,
    /// Sd of the individual effect around its group mean.
    pub effect_sd: f64,
}

impl Default for LateConfig {
    fn default() -> Self {
        Self {
            p_complier: 0.5,
            p_always: 0.25,
            p_never: 0.25,
            effect_complier: 1.0,
            effect_always: 3.0,
            effect_never: -1.0,
            effect_sd: 0.5,
        }
    }
}

impl LateConfig {
    pub fn probabilities(&self) -> [f64; 3] {
        [self.p_complier, self.p_always, self.p_never]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probabilities();
        if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidProbabilities(format!("{p:?} outside [0, 1]")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProbabilities(format!("sum to {sum}")));
        }
        if !(self.effect_sd >= 0.0) {
            return Err(Error::InvalidConfig("effect_sd must be non-negative".into()));
        }
        Ok(())
    }

    fn mean_effect(&self, g: ComplianceGroup) -> f64 {
        match g {
            ComplianceGroup::Complier => self.effect_complier,
            ComplianceGroup::AlwaysTaker => self.effect_always,
            ComplianceGroup::NeverTaker => self.effect_never,
        }
    }

    /// Population average treatment effect.
    pub fn average_effect(&self) -> f64 {
        ComplianceGroup::ALL.iter().zip(self.probabilities()).map(|(&g, p)| p * self.mean_effect(g)).sum()
    }
}

/// Panel with `Z` the instrument, `X` the treatment and `Y` the realized
/// outcome. Latents: `group`, `y0`, `y1`. The state column is zero.
pub fn simulate_late(cfg: &LateConfig, n: usize, seed: u64) -> Result<SeriesPanel> {
    cfg.validate()?;
    let mut rng = seeded_rng(seed);
    let probs = cfg.probabilities();
    let mut cols: [Vec<f64>; 6] = Default::default();
    for _ in 0..n {
        let group = ComplianceGroup::ALL[draw_index(&probs, &mut rng)];
        let z = rng.random::<f64>() < 0.5;
        let y0: f64 = StandardNormal.sample(&mut rng);
        let noise: f64 = StandardNormal.sample(&mut rng);
        let y1 = y0 + cfg.mean_effect(group) + cfg.effect_sd * noise;
        let x = group.treatment(z);
        let values = [if x { y1 } else { y0 }, f64::from(u8::from(x)), f64::from(u8::from(z)), group.code(), y0, y1];
        for (col, v) in cols.iter_mut().zip(values) {
            col.push(v);
        }
    }
    let [y, x, z, group, y0, y1] = cols;
    SeriesPanel::new(y, x, vec![0.0; n], StateKind::Binary)?
        .with_instrument(z)?
        .with_latent("group", group)?
        .with_latent("y0", y0)?
        .with_latent("y1", y1)
}
