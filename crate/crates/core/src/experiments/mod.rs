//! Config-driven Monte Carlo experiments. Each run returns a
//! [`ResultSummary`] and the data files it produced; nothing here touches
//! the filesystem.

mod config;
mod figure2;
mod instruments;
mod prop3;
mod solver;
mod stvar;
mod weights;

use std::collections::BTreeMap;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::seeded_rng;
use crate::error::{Error, Result};

pub use config::{
    ExperimentConfig, Figure2Params, LateParams, LpivParams, Prop3Params, SolverParams, StvarParams, WeightsParams,
};

/// Experiment names accepted by [`run_experiment`].
pub const EXPERIMENTS: [&str; 7] = ["dsge_solver", "figure2", "stvar", "lpiv", "weights", "prop3", "late"];

/// Tolerance multiplier applied to Monte Carlo standard errors.
pub const MC_SE_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub mc_se: f64,
    pub criterion: String,
    /// `None` for metrics reported without a criterion.
    pub pass: Option<bool>,
}

impl Metric {
    pub fn info(value: f64, mc_se: f64) -> Self {
        Self { value, mc_se, criterion: "reported".into(), pass: None }
    }

    pub fn info_from(draws: &[f64]) -> Self {
        let (value, mc_se) = mean_and_se(draws);
        Self::info(value, mc_se)
    }

    /// Mean of `draws` within `MC_SE_MULTIPLIER` standard errors of zero.
    pub fn near_zero(draws: &[f64]) -> Self {
        let (value, mc_se) = mean_and_se(draws);
        Self {
            value,
            mc_se,
            criterion: "|value| <= 3 mc_se".into(),
            pass: Some(value.abs() <= MC_SE_MULTIPLIER * mc_se),
        }
    }

    /// Mean of `draws` more than `MC_SE_MULTIPLIER` standard errors from zero.
    pub fn away_from_zero(draws: &[f64]) -> Self {
        let (value, mc_se) = mean_and_se(draws);
        Self {
            value,
            mc_se,
            criterion: "|value| > 3 mc_se".into(),
            pass: Some(value.abs() > MC_SE_MULTIPLIER * mc_se),
        }
    }

    /// Mean of `draws` more than `MC_SE_MULTIPLIER` standard errors above zero.
    pub fn positive(draws: &[f64]) -> Self {
        let (value, mc_se) = mean_and_se(draws);
        Self { value, mc_se, criterion: "value > 3 mc_se".into(), pass: Some(value > MC_SE_MULTIPLIER * mc_se) }
    }

    pub fn below(value: f64, mc_se: f64, bound: f64) -> Self {
        Self { value, mc_se, criterion: format!("value < {bound:e}"), pass: Some(value < bound) }
    }

    pub fn above(value: f64, mc_se: f64, bound: f64) -> Self {
        Self { value, mc_se, criterion: format!("value > {bound:e}"), pass: Some(value > bound) }
    }

    pub fn within(value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            value,
            mc_se: 0.0,
            criterion: format!("|value - {target}| <= {tolerance}"),
            pass: Some((value - target).abs() <= tolerance),
        }
    }
}

pub use crate::estimators::mean_and_se;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub experiment: String,
    pub seed: u64,
    #[serde(rename = "R")]
    pub replications: usize,
    #[serde(rename = "T")]
    pub sample_size: usize,
    #[serde(rename = "H")]
    pub horizons: usize,
    pub params: serde_json::Value,
    pub metrics: BTreeMap<String, Metric>,
}

impl ResultSummary {
    /// Conjunction of every metric that carries a criterion.
    pub fn all_pass(&self) -> bool {
        self.metrics.values().all(|m| m.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&str> {
        self.metrics.iter().filter(|(_, m)| m.pass == Some(false)).map(|(k, _)| k.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Summary plus named output files (`summary.json`, CSVs).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: ResultSummary,
    pub files: BTreeMap<String, String>,
}

impl ExperimentOutput {
    fn new(summary: ResultSummary, mut files: BTreeMap<String, String>) -> Self {
        files.insert("summary.json".into(), summary.to_json());
        Self { summary, files }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment.as_str() {
        "dsge_solver" => solver::run(cfg),
        "figure2" => figure2::run(cfg),
        "stvar" => stvar::run(cfg),
        "lpiv" => instruments::run_lpiv(cfg),
        "weights" => weights::run(cfg),
        "prop3" => prop3::run(cfg),
        "late" => instruments::run_late(cfg),
        other => Err(Error::InvalidConfig(format!("unknown experiment {other:?}"))),
    }
}

/// Seed of replication `r`.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// `n` independent seeds derived from one replication seed, for replications
/// that simulate more than one panel.
pub fn sub_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Runs `job(r, seed_r)` for `r = 0..replications` on a pool of `workers`
/// threads. Results come back in replication order, so anything computed
/// from them is independent of the worker count.
pub fn run_replications<T, F>(workers: usize, replications: usize, base_seed: u64, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..replications).into_par_iter().map(|r| job(r, replication_seed(base_seed, r))).collect()
    })
}

fn summary(cfg: &ExperimentConfig, dims: (usize, usize, usize), params: serde_json::Value) -> ResultSummary {
    ResultSummary {
        experiment: cfg.experiment.clone(),
        seed: cfg.seed,
        replications: dims.0,
        sample_size: dims.1,
        horizons: dims.2,
        params,
        metrics: BTreeMap::new(),
    }
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("parameters serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_order_is_stable() {
        let job = |r: usize, seed: u64| Ok((r, sub_seeds(seed, 2)));
        let a = run_replications(1, 16, 7, job).unwrap();
        let b = run_replications(5, 16, 7, job).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[3].0, 3);
        assert_ne!(a[3].1[0], a[3].1[1]);
    }

    #[test]
    fn metric_criteria() {
        assert_eq!(Metric::near_zero(&[0.1, -0.1, 0.05]).pass, Some(true));
        assert_eq!(Metric::away_from_zero(&[1.0, 1.1, 0.9]).pass, Some(true));
        assert_eq!(Metric::positive(&[-1.0, -1.1, -0.9]).pass, Some(false));
        assert_eq!(Metric::near_zero(&[0.0]).pass, Some(true));
        assert_eq!(Metric::info(1.0, 0.0).pass, None);
    }

    #[test]
    fn unknown_experiment_is_config_error() {
        let cfg = ExperimentConfig { experiment: "nope".into(), ..Default::default() };
        assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
    }
}
