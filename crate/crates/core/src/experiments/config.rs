use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dgp::{DsgeConfig, GovSpendConfig, LateConfig, SimplifiedIncomeConfig, StvarConfig};
use crate::error::{Error, Result};

/// One JSON document describing a run. Replications, sample size and
/// horizons fall back to per-experiment defaults when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub replications: Option<usize>,
    pub sample_size: Option<usize>,
    pub horizons: Option<usize>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub dsge_solver: SolverParams,
    pub figure2: Figure2Params,
    pub stvar: StvarParams,
    pub lpiv: LpivParams,
    pub weights: WeightsParams,
    pub prop3: Prop3Params,
    pub late: LateParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "figure2".into(),
            seed: 42,
            replications: None,
            sample_size: None,
            horizons: None,
            workers: None,
            output_dir: None,
            dsge_solver: SolverParams::default(),
            figure2: Figure2Params::default(),
            stvar: StvarParams::default(),
            lpiv: LpivParams::default(),
            weights: WeightsParams::default(),
            prop3: Prop3Params::default(),
            late: LateParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn named(experiment: &str) -> Self {
        Self { experiment: experiment.into(), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == Some(0) {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if matches!(self.sample_size, Some(t) if t < 1000) {
            return Err(Error::InvalidConfig("sample_size must be at least 1000".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// `(R, T, H)` with the given defaults filled in.
    pub fn dims(&self, r: usize, t: usize, h: usize) -> (usize, usize, usize) {
        (self.replications.unwrap_or(r), self.sample_size.unwrap_or(t), self.horizons.unwrap_or(h))
    }

    pub fn worker_count(&self) -> usize {
        self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub dsge: DsgeConfig,
    pub expected_savings: [f64; 2],
    pub savings_tolerance: f64,
    pub euler_tolerance: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { dsge: DsgeConfig::default(), expected_savings: [0.86, 0.77], savings_tolerance: 0.01, euler_tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure2Params {
    pub dsge: DsgeConfig,
    pub var_lags: usize,
    /// Horizons searched for a significant gap between the moving-state VAR
    /// and the LP.
    pub moving_gap_horizons: (usize, usize),
    /// Horizon at which the fixed-state VAR gap is compared with the truth.
    pub fixed_gap_horizon: usize,
}

impl Default for Figure2Params {
    fn default() -> Self {
        Self { dsge: DsgeConfig::default(), var_lags: 30, moving_gap_horizons: (1, 5), fixed_gap_horizon: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StvarParams {
    pub model: StvarConfig,
    /// Threshold on the standardized state for the binary specification.
    pub threshold: f64,
    pub polynomial_degree: usize,
    pub check_horizons: Vec<usize>,
    pub fd_pairs: usize,
    pub fd_step: f64,
    pub fd_tolerance: f64,
    /// Floor on the denominator of the relative finite-difference error.
    pub fd_floor: f64,
}

impl Default for StvarParams {
    fn default() -> Self {
        Self {
            model: StvarConfig::synthetic(),
            threshold: 0.8,
            polynomial_degree: 2,
            check_horizons: vec![0, 2, 4],
            fd_pairs: 200,
            fd_step: 1e-4,
            fd_tolerance: 1e-4,
            fd_floor: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpivParams {
    pub govspend: GovSpendConfig,
    /// Consolidation share of the control run.
    pub control_consolidation: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_step: f64,
}

impl Default for LpivParams {
    fn default() -> Self {
        Self { govspend: GovSpendConfig::default(), control_consolidation: 0.0, grid_lo: -3.0, grid_hi: 3.0, grid_step: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsParams {
    pub grid_step: f64,
    pub gaussian_tolerance: f64,
    pub uniform_tolerance: f64,
    /// Minimum sup-distance between the uniform weight curve and the uniform
    /// density.
    pub uniform_separation: f64,
}

impl Default for WeightsParams {
    fn default() -> Self {
        Self { grid_step: 0.01, gaussian_tolerance: 0.01, uniform_tolerance: 0.01, uniform_separation: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop3Params {
    pub income: SimplifiedIncomeConfig,
}

impl Default for Prop3Params {
    fn default() -> Self {
        Self { income: SimplifiedIncomeConfig::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LateParams {
    pub late: LateConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment":"lpiv","seed":3,"lpiv":{"control_consolidation":0.1}}"#)
            .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.lpiv.control_consolidation, 0.1);
        assert_eq!(cfg.lpiv.govspend, GovSpendConfig::default());
        assert_eq!(cfg.dims(10, 1000, 0), (10, 1000, 0));
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn invariants() {
        let mut cfg = ExperimentConfig::named("weights");
        cfg.sample_size = Some(10);
        assert!(cfg.validate().is_err());
        cfg.sample_size = Some(1000);
        cfg.replications = Some(0);
        assert!(cfg.validate().is_err());
    }
}
