use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_finite, seeded_rng, SeriesPanel, StateKind, BURN_IN};
use crate::error::{Error, Result};
use crate::numerics::cholesky_lower;

/// Length of the pre-pass used to calibrate the state normalization.
pub const CALIBRATION_PERIODS: usize = 100_000;
const CALIBRATION_SEED: u64 = 0x5714_7e0f;
const CALIBRATION_TOL: f64 = 1e-10;
const CALIBRATION_MAX_ITER: usize = 200;

/// Smooth-transition VAR. Lag matrices and covariances are logistic mixtures
/// of an expansion regime (`*_e`) and a recession regime (`*_r`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StvarConfig {
    pub n: usize,
    pub p: usize,
    /// `p` row-major `n x n` lag matrices.
    pub pi_e: Vec<Vec<Vec<f64>>>,
    pub pi_r: Vec<Vec<Vec<f64>>>,
    pub omega_e: Vec<Vec<f64>>,
    pub omega_r: Vec<Vec<f64>>,
    pub gamma: f64,
    pub state_window: usize,
    /// Variable whose trailing average defines the state.
    pub state_var_index: usize,
    /// Variable reported as the panel outcome.
    pub outcome_index: usize,
}

impl Default for StvarConfig {
    fn default() -> Self {
        Self::synthetic()
    }
}

impl StvarConfig {
    /// Stable two-variable calibration with clearly different regimes.
    pub fn synthetic() -> Self {
        Self {
            n: 2,
            p: 3,
            pi_e: vec![
                vec![vec![0.5, 0.0], vec![0.2, 0.4]],
                vec![vec![0.1, 0.0], vec![0.05, 0.1]],
                vec![vec![0.0, 0.0], vec![0.0, 0.05]],
            ],
            pi_r: vec![
                vec![vec![0.3, 0.1], vec![0.4, 0.2]],
                vec![vec![0.1, 0.0], vec![0.1, 0.05]],
                vec![vec![0.05, 0.0], vec![0.0, 0.0]],
            ],
            omega_e: vec![vec![1.0, 0.3], vec![0.3, 1.0]],
            omega_r: vec![vec![1.5, 0.6], vec![0.6, 2.0]],
            gamma: 1.5,
            state_window: 7,
            state_var_index: 1,
            outcome_index: 1,
        }
    }

    /// Same as [`StvarConfig::synthetic`] but with both regimes set to the
    /// expansion parameters, i.e. a linear VAR.
    pub fn single_regime() -> Self {
        let mut cfg = Self::synthetic();
        cfg.pi_r = cfg.pi_e.clone();
        cfg.omega_r = cfg.omega_e.clone();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.state_window == 0 {
            return bad("state_window must be at least 1".into());
        }
        if self.state_var_index >= self.n || self.outcome_index >= self.n {
            return bad("variable index out of range".into());
        }
        for (name, mats) in [("pi_e", &self.pi_e), ("pi_r", &self.pi_r)] {
            if mats.len() != self.p {
                return bad(format!("{name} has {} lag matrices, expected {}", mats.len(), self.p));
            }
            for m in mats {
                square(m, self.n, name)?;
            }
        }
        for (name, m) in [("omega_e", &self.omega_e), ("omega_r", &self.omega_r)] {
            cholesky_lower(&square(m, self.n, name)?)?;
        }
        Ok(())
    }
}

fn square(rows: &[Vec<f64>], n: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("{name} must be {n} x {n}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// A validated [`StvarConfig`] together with the calibrated state
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct StvarModel {
    pub config: StvarConfig,
    pub pi_e: Vec<DMatrix<f64>>,
    pub pi_r: Vec<DMatrix<f64>>,
    pub omega_e: DMatrix<f64>,
    pub omega_r: DMatrix<f64>,
    /// Mean of the raw trailing average.
    pub state_mean: f64,
    /// Sd of the raw trailing average.
    pub state_sd: f64,
}

/// Simulated paths in flat row-major storage (`y[t * n + i]`).
struct Paths {
    y: Vec<f64>,
    eps: Vec<f64>,
    state: Vec<f64>,
}

impl StvarModel {
    /// Validates `config` and calibrates the state normalization to the
    /// stationary mean and sd of the trailing average. The normalization feeds
    /// back into the dynamics, so the pre-pass is iterated to a fixed point
    /// with common random numbers.
    pub fn new(config: StvarConfig) -> Result<Self> {
        let mut model = Self::with_normalization(config, 0.0, 1.0)?;
        let mut rng = seeded_rng(CALIBRATION_SEED);
        let n = model.config.n;
        let total = BURN_IN + CALIBRATION_PERIODS;
        let eps: Vec<f64> = (0..total * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for _ in 0..CALIBRATION_MAX_ITER {
            let paths = model.run(eps.clone())?;
            let avgs: Vec<f64> = (BURN_IN..total).map(|t| model.trailing_average(&paths.y, t)).collect();
            let mean = avgs.iter().sum::<f64>() / avgs.len() as f64;
            let var = avgs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (avgs.len() - 1) as f64;
            let sd = var.sqrt();
            if !(sd > 0.0) {
                return Err(Error::DegenerateSample);
            }
            let change = (mean - model.state_mean).abs() + (sd - model.state_sd).abs();
            model.state_mean = mean;
            model.state_sd = sd;
            if change < CALIBRATION_TOL * (1.0 + sd) {
                return Ok(model);
            }
        }
        Err(Error::NoConvergence(CALIBRATION_MAX_ITER))
    }

    /// Model with an externally supplied state normalization.
    pub fn with_normalization(config: StvarConfig, state_mean: f64, state_sd: f64) -> Result<Self> {
        config.validate()?;
        if !(state_sd > 0.0) {
            return Err(Error::NonPositiveSd(state_sd));
        }
        let n = config.n;
        let to_mats = |v: &[Vec<Vec<f64>>]| v.iter().map(|m| square(m, n, "lag")).collect::<Result<Vec<_>>>();
        Ok(Self {
            pi_e: to_mats(&config.pi_e)?,
            pi_r: to_mats(&config.pi_r)?,
            omega_e: square(&config.omega_e, n, "omega_e")?,
            omega_r: square(&config.omega_r, n, "omega_r")?,
            state_mean,
            state_sd,
            config,
        })
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    /// Recession weight `F(s) = 1 / (1 + exp(gamma s))`.
    pub fn logistic(&self, s: f64) -> f64 {
        1.0 / (1.0 + (self.config.gamma * s).exp())
    }

    /// Mixed lag matrix `(1 - f) Pi_E,k + f Pi_R,k` for lag `k >= 1`.
    pub fn lag_matrix(&self, k: usize, f: f64) -> DMatrix<f64> {
        &self.pi_e[k - 1] * (1.0 - f) + &self.pi_r[k - 1] * f
    }

    pub fn covariance(&self, f: f64) -> DMatrix<f64> {
        &self.omega_e * (1.0 - f) + &self.omega_r * f
    }

    pub fn impact(&self, f: f64) -> Result<DMatrix<f64>> {
        cholesky_lower(&self.covariance(f))
    }

    /// Number of leading periods needed before the recursion can start.
    pub fn history_len(&self) -> usize {
        self.config.p.max(self.config.state_window)
    }

    fn trailing_average(&self, y: &[f64], t: usize) -> f64 {
        let (n, r, w) = (self.config.n, self.config.state_var_index, self.config.state_window);
        (t + 1 - w..=t).map(|u| y[u * n + r]).sum::<f64>() / w as f64
    }

    fn normalized_state(&self, y: &[f64], t: usize) -> f64 {
        (self.trailing_average(y, t) - self.state_mean) / self.state_sd
    }

    /// Advances periods `from..to` in place. Requires `y`, `state` to be
    /// filled for all earlier periods.
    fn advance(&self, paths: &mut Paths, from: usize, to: usize) -> Result<()> {
        let n = self.config.n;
        let mut next = vec![0.0; n];
        for t in from..to {
            let f = self.logistic(paths.state[t - 1]);
            let chol = self.impact(f)?;
            for (i, out) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 1..=self.config.p {
                    let (e, r) = (&self.pi_e[k - 1], &self.pi_r[k - 1]);
                    let lag = &paths.y[(t - k) * n..(t - k + 1) * n];
                    for j in 0..n {
                        acc += ((1.0 - f) * e[(i, j)] + f * r[(i, j)]) * lag[j];
                    }
                }
                for j in 0..=i {
                    acc += chol[(i, j)] * paths.eps[t * n + j];
                }
                check_finite(acc, t)?;
                *out = acc;
            }
            paths.y[t * n..(t + 1) * n].copy_from_slice(&next);
            paths.state[t] = self.normalized_state(&paths.y, t);
        }
        Ok(())
    }

    /// Runs the recursion from zero history over the given shocks.
    fn run(&self, eps: Vec<f64>) -> Result<Paths> {
        let n = self.config.n;
        let total = eps.len() / n;
        let start = self.history_len();
        let mut paths = Paths { y: vec![0.0; total * n], eps, state: vec![0.0; total] };
        for t in 0..start.min(total) {
            paths.state[t] = -self.state_mean / self.state_sd;
        }
        self.advance(&mut paths, start, total)?;
        Ok(paths)
    }

    /// Simulates `len` periods after a burn-in. Latents: `y_i`, `eps_i`
    /// (1-based variable index) and `F`, the recession weight `F(S_{t-1})`
    /// that governs period `t`.
    pub fn simulate(&self, len: usize, seed: u64) -> Result<SeriesPanel> {
        let n = self.config.n;
        let total = BURN_IN + len;
        let mut rng = seeded_rng(seed);
        let eps: Vec<f64> = (0..total * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let paths = self.run(eps)?;
        let column = |data: &[f64], i: usize| (BURN_IN..total).map(|t| data[t * n + i]).collect::<Vec<_>>();
        let weights = (BURN_IN..total).map(|t| self.logistic(paths.state[t - 1])).collect();
        let mut panel = SeriesPanel::new(
            column(&paths.y, self.config.outcome_index),
            column(&paths.eps, 0),
            paths.state[BURN_IN..].to_vec(),
            StateKind::Continuous,
        )?
        .with_latent("F", weights)?;
        for i in 0..n {
            panel = panel
                .with_latent(format!("y_{}", i + 1), column(&paths.y, i))?
                .with_latent(format!("eps_{}", i + 1), column(&paths.eps, i))?;
        }
        Ok(panel)
    }

    /// Endogenous vector `Y_t` stored in a simulated panel.
    pub fn observed(&self, panel: &SeriesPanel, t: usize) -> Result<DVector<f64>> {
        let cols = self.latent_columns(panel, "y")?;
        Ok(DVector::from_iterator(self.n(), cols.iter().map(|c| c[t])))
    }

    /// Structural shock vector at `t` stored in a simulated panel.
    pub fn shocks(&self, panel: &SeriesPanel, t: usize) -> Result<DVector<f64>> {
        let cols = self.latent_columns(panel, "eps")?;
        Ok(DVector::from_iterator(self.n(), cols.iter().map(|c| c[t])))
    }

    fn latent_columns<'a>(&self, panel: &'a SeriesPanel, prefix: &str) -> Result<Vec<&'a [f64]>> {
        (1..=self.n()).map(|i| panel.latent(&format!("{prefix}_{i}"))).collect()
    }

    /// Re-simulates `Y_t, ..., Y_{t+horizon}` from the stored history and
    /// shocks of `panel`, with the first structural shock at `t` shifted by
    /// `delta`. Requires `t >= history_len()`.
    pub fn perturbed_path(&self, panel: &SeriesPanel, t: usize, horizon: usize, delta: f64) -> Result<Vec<DVector<f64>>> {
        let n = self.n();
        let start = self.history_len();
        if t < start {
            return Err(Error::SampleTooShort { rows: t, horizon: start });
        }
        if t + horizon >= panel.len() {
            return Err(Error::HorizonExceedsSample(horizon));
        }
        let lo = t - start;
        let hi = t + horizon + 1;
        let ys = self.latent_columns(panel, "y")?;
        let es = self.latent_columns(panel, "eps")?;
        let mut paths = Paths { y: vec![0.0; (hi - lo) * n], eps: vec![0.0; (hi - lo) * n], state: vec![0.0; hi - lo] };
        for u in lo..hi {
            for i in 0..n {
                paths.y[(u - lo) * n + i] = ys[i][u];
                paths.eps[(u - lo) * n + i] = es[i][u];
            }
        }
        paths.eps[start * n] += delta;
        for u in lo..t {
            paths.state[u - lo] = panel.state[u];
        }
        self.advance(&mut paths, start, hi - lo)?;
        Ok((start..hi - lo).map(|u| DVector::from_column_slice(&paths.y[u * n..(u + 1) * n])).collect())
    }

    /// Central finite difference of `Y_{t+h}` with respect to the first
    /// structural shock at `t`.
    pub fn finite_difference_effect(&self, panel: &SeriesPanel, t: usize, h: usize, step: f64) -> Result<DVector<f64>> {
        let up = self.perturbed_path(panel, t, h, step)?;
        let down = self.perturbed_path(panel, t, h, -step)?;
        Ok((&up[h] - &down[h]) / (2.0 * step))
    }
}

/// Calibrates [`StvarModel`] for `config` and simulates one panel.
pub fn simulate_stvar(config: &StvarConfig, len: usize, seed: u64) -> Result<SeriesPanel> {
    StvarModel::new(config.clone())?.simulate(len, seed)
}
