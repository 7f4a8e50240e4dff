use nalgebra::{Matrix2, Vector2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_finite, seeded_rng, MarkovChain, SeriesPanel, StateKind, BURN_IN};
use crate::error::{Error, Result};

const EULER_TOL: f64 = 1e-10;
const MAX_NEWTON_ITER: usize = 200;

/// Two-state consumption-savings economy. State 0 is the high-productivity
/// state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsgeConfig {
    pub beta: f64,
    pub sigma: f64,
    pub a0: f64,
    pub a1: f64,
    pub b0_nu: f64,
    pub b1_nu: f64,
    pub nu: f64,
    pub pi00: f64,
    pub pi11: f64,
}

impl Default for DsgeConfig {
    fn default() -> Self {
        Self { beta: 0.9, sigma: 2.0, a0: 1.2, a1: 0.75, b0_nu: 0.06, b1_nu: 0.2, nu: 0.3, pi00: 0.85, pi11: 0.8 }
    }
}

impl DsgeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.a1 > 0.0 && self.a1 <= self.a0 && self.a0.is_finite()) {
            return bad("productivities must satisfy 0 < A1 <= A0");
        }
        if !(self.pi00 > 0.0 && self.pi00 < 1.0 && self.pi11 > 0.0 && self.pi11 < 1.0) {
            return bad("staying probabilities must lie in (0, 1)");
        }
        if ![self.b0_nu, self.b1_nu, self.nu].iter().all(|v| v.is_finite()) {
            return bad("transfer parameters must be finite");
        }
        Ok(())
    }

    pub fn chain(&self) -> Result<MarkovChain> {
        MarkovChain::two_state(self.pi00, self.pi11)
    }

    pub fn productivity(&self, s: usize) -> f64 {
        [self.a0, self.a1][s]
    }

    /// Windfall impact `nu * B(s)`.
    pub fn windfall(&self, s: usize) -> f64 {
        [self.b0_nu, self.b1_nu][s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavingsSolution {
    /// Savings rates by state.
    pub savings: [f64; 2],
    /// Consumption shares `1 - savings`.
    pub consumption_share: [f64; 2],
    /// Max absolute Euler equation residual at the solution.
    pub euler_residual: f64,
    pub iterations: usize,
}

fn euler_residuals(cfg: &DsgeConfig, c: [f64; 2]) -> [f64; 2] {
    let g = 1.0 / cfg.sigma;
    let chain = [[cfg.pi00, 1.0 - cfg.pi00], [1.0 - cfg.pi11, cfg.pi11]];
    let mut out = [0.0; 2];
    for s in 0..2 {
        let rhs: f64 = (0..2)
            .map(|n| {
                let a = cfg.productivity(n);
                chain[s][n] * (c[n] * a * (1.0 - c[s])).powf(-g) * a
            })
            .sum();
        out[s] = c[s].powf(-g) - cfg.beta * rhs;
    }
    out
}

/// Solves the two Euler equations for the state-dependent consumption shares
/// by damped Newton iteration on logit shares.
pub fn solve_dsge_savings(cfg: &DsgeConfig) -> Result<SavingsSolution> {
    cfg.validate()?;
    let g = 1.0 / cfg.sigma;
    let chain = [[cfg.pi00, 1.0 - cfg.pi00], [1.0 - cfg.pi11, cfg.pi11]];
    let logistic = |u: f64| 1.0 / (1.0 + (-u).exp());
    // In logit coordinates u_s the Euler equation reads
    // g ln((1-c_s)/c_s) - ln(beta sum_n pi_sn A_n^(1-g) c_n^(-g)) = 0.
    let system = |u: Vector2<f64>| -> (Vector2<f64>, Matrix2<f64>) {
        let c = u.map(logistic);
        let mut f = Vector2::zeros();
        let mut jac = Matrix2::zeros();
        for s in 0..2 {
            let terms: Vec<f64> =
                (0..2).map(|n| cfg.beta * chain[s][n] * cfg.productivity(n).powf(1.0 - g) * c[n].powf(-g)).collect();
            let q: f64 = terms.iter().sum();
            f[s] = -g * u[s] - q.ln();
            for n in 0..2 {
                jac[(s, n)] = g * terms[n] * (1.0 - c[n]) / q;
            }
            jac[(s, s)] -= g;
        }
        (f, jac)
    };

    // Start from the share that solves the problem with state-independent
    // consumption: (1 - c)^g = beta E[A^(1-g)] under the stationary law.
    let stationary = cfg.chain()?.stationary();
    let mean_return: f64 = (0..2).map(|n| stationary[n] * cfg.productivity(n).powf(1.0 - g)).sum();
    let c_start = 1.0 - (cfg.beta * mean_return).powf(1.0 / g);
    let u_start = if c_start > 0.0 && c_start < 1.0 { (c_start / (1.0 - c_start)).ln() } else { 0.0 };
    let mut u = Vector2::from_element(u_start);
    let (mut f, mut jac) = system(u);
    for iter in 1..=MAX_NEWTON_ITER {
        let step = jac.lu().solve(&f).ok_or(Error::SingularOperator)?;
        let norm = f.norm();
        let mut lambda = 1.0;
        let (mut next, mut next_f, mut next_jac) = (u, f, jac);
        while lambda > 1e-8 {
            let cand = u - step * lambda;
            let (cf, cj) = system(cand);
            if cf.iter().all(|v| v.is_finite()) && cf.norm() < norm.max(1e-300) * (1.0 - 1e-4 * lambda) {
                next = cand;
                next_f = cf;
                next_jac = cj;
                break;
            }
            lambda *= 0.5;
        }
        let moved = lambda > 1e-8;
        if moved {
            u = next;
            f = next_f;
            jac = next_jac;
        }
        let c = [logistic(u[0]), logistic(u[1])];
        let resid = euler_residuals(cfg, c);
        let max_resid = resid[0].abs().max(resid[1].abs());
        if max_resid < EULER_TOL {
            return Ok(SavingsSolution {
                savings: [1.0 - c[0], 1.0 - c[1]],
                consumption_share: c,
                euler_residual: max_resid,
                iterations: iter,
            });
        }
        if !moved {
            break;
        }
    }
    Err(Error::NoConvergence(MAX_NEWTON_ITER))
}

/// Income `Y_t = A(S_t) phi(S_{t-1}) Y_{t-1} + nu + nu B(S_t) X_t` with the
/// savings rates from [`solve_dsge_savings`]. The state column holds `S_t`.
pub fn simulate_dsge(cfg: &DsgeConfig, len: usize, seed: u64) -> Result<SeriesPanel> {
    let solution = solve_dsge_savings(cfg)?;
    let phi = solution.savings;
    simulate_two_state(
        &cfg.chain()?,
        len,
        seed,
        |s_now, s_prev, y_prev, x| {
            cfg.productivity(s_now) * phi[s_prev] * y_prev + cfg.nu + cfg.windfall(s_now) * x
        },
    )
}

/// Which income recursion [`simulate_simplified_income`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeMode {
    /// `Y_t = phi(S_{t-1}) Y_{t-1} + nu + nu B(S_t) X_t`.
    #[default]
    Standard,
    /// `Y_t = S_{t-2} X_{t-1}`.
    LaggedInteraction,
}

/// Income process with unit productivity and given savings rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplifiedIncomeConfig {
    pub pi00: f64,
    pub pi11: f64,
    pub phi: [f64; 2],
    /// Windfall impacts `nu * B(s)`.
    pub windfall: [f64; 2],
    pub nu: f64,
    pub mode: IncomeMode,
}

impl Default for SimplifiedIncomeConfig {
    fn default() -> Self {
        Self { pi00: 0.85, pi11: 0.8, phi: [0.86, 0.77], windfall: [0.06, 0.2], nu: 0.3, mode: IncomeMode::Standard }
    }
}

impl SimplifiedIncomeConfig {
    pub fn validate(&self) -> Result<()> {
        for &p in &self.phi {
            if !(p.abs() < 1.0) {
                return Err(Error::ExplosivePhi(p));
            }
        }
        if !self.windfall.iter().chain([&self.nu]).all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("transfer parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn chain(&self) -> Result<MarkovChain> {
        MarkovChain::two_state(self.pi00, self.pi11)
    }
}

pub fn simulate_simplified_income(cfg: &SimplifiedIncomeConfig, len: usize, seed: u64) -> Result<SeriesPanel> {
    cfg.validate()?;
    let chain = cfg.chain()?;
    match cfg.mode {
        IncomeMode::Standard => simulate_two_state(&chain, len, seed, |s_now, s_prev, y_prev, x| {
            cfg.phi[s_prev] * y_prev + cfg.nu + cfg.windfall[s_now] * x
        }),
        IncomeMode::LaggedInteraction => {
            let mut rng = seeded_rng(seed);
            let total = BURN_IN + len;
            let states = chain.sample_path(total, &mut rng);
            let shocks: Vec<f64> = (0..total).map(|_| StandardNormal.sample(&mut rng)).collect();
            let outcome: Vec<f64> = (BURN_IN..total).map(|t| states[t - 2] as f64 * shocks[t - 1]).collect();
            SeriesPanel::new(
                outcome,
                shocks[BURN_IN..].to_vec(),
                states[BURN_IN..].iter().map(|&s| s as f64).collect(),
                StateKind::Binary,
            )
        }
    }
}

/// Shared driver for the two-state income recursions. `next(s_t, s_{t-1},
/// y_{t-1}, x_t)` returns `y_t`.
fn simulate_two_state(
    chain: &MarkovChain,
    len: usize,
    seed: u64,
    next: impl Fn(usize, usize, f64, f64) -> f64,
) -> Result<SeriesPanel> {
    let mut rng = seeded_rng(seed);
    let total = BURN_IN + len;
    let states = chain.sample_path(total, &mut rng);
    let mut outcome = Vec::with_capacity(len);
    let mut shock = Vec::with_capacity(len);
    let mut y_prev = 0.0;
    for t in 0..total {
        let x: f64 = StandardNormal.sample(&mut rng);
        let s_prev = if t == 0 { states[0] } else { states[t - 1] };
        let y = next(states[t], s_prev, y_prev, x);
        check_finite(y, t)?;
        if t >= BURN_IN {
            outcome.push(y);
            shock.push(x);
        }
        y_prev = y;
    }
    SeriesPanel::new(outcome, shock, states[BURN_IN..].iter().map(|&s| s as f64).collect(), StateKind::Binary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_savings_rates() {
        let sol = solve_dsge_savings(&DsgeConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.savings[0], 0.86, epsilon = 0.01);
        assert_abs_diff_eq!(sol.savings[1], 0.77, epsilon = 0.01);
        assert!(sol.savings[0] > sol.savings[1]);
        assert!(sol.euler_residual < 1e-10);
        let r = euler_residuals(&DsgeConfig::default(), sol.consumption_share);
        assert!(r[0].abs() < 1e-10 && r[1].abs() < 1e-10);
    }

    #[test]
    fn symmetric_states_share_savings_rate() {
        let cfg = DsgeConfig { a1: 1.2, pi11: 0.85, ..DsgeConfig::default() };
        let sol = solve_dsge_savings(&cfg).unwrap();
        assert_abs_diff_eq!(sol.savings[0], sol.savings[1], epsilon = 1e-10);
    }

    #[test]
    fn solver_handles_other_elasticities() {
        for sigma in [1.0, 1.5, 4.0] {
            let cfg = DsgeConfig { sigma, ..DsgeConfig::default() };
            let sol = solve_dsge_savings(&cfg).unwrap();
            assert!(sol.euler_residual < 1e-10, "sigma {sigma}");
        }
    }

    #[test]
    fn reports_missing_interior_solution() {
        // With elasticity 0.5 the shares are driven to zero.
        let cfg = DsgeConfig { sigma: 0.5, ..DsgeConfig::default() };
        assert!(matches!(solve_dsge_savings(&cfg), Err(Error::NoConvergence(_))));
    }

    #[test]
    fn config_validation() {
        assert!(DsgeConfig { beta: 1.0, ..DsgeConfig::default() }.validate().is_err());
        assert!(DsgeConfig { a1: 1.3, ..DsgeConfig::default() }.validate().is_err());
        assert!(DsgeConfig { pi00: 1.0, ..DsgeConfig::default() }.validate().is_err());
        assert!(DsgeConfig { sigma: 0.0, ..DsgeConfig::default() }.validate().is_err());
    }

    #[test]
    fn no_windfall_means_deterministic_income() {
        let cfg = DsgeConfig { b0_nu: 0.0, b1_nu: 0.0, ..DsgeConfig::default() };
        let a = simulate_dsge(&cfg, 2000, 1).unwrap();
        let phi = solve_dsge_savings(&cfg).unwrap().savings;
        for t in 1..a.len() {
            let (s, sp) = (a.binary_state(t), a.binary_state(t - 1));
            let expected = cfg.productivity(s) * phi[sp] * a.outcome[t - 1] + cfg.nu;
            assert_abs_diff_eq!(a.outcome[t], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn dsge_is_deterministic_and_finite() {
        let cfg = DsgeConfig::default();
        let a = simulate_dsge(&cfg, 50_000, 3).unwrap();
        let b = simulate_dsge(&cfg, 50_000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.outcome.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn simplified_rejects_explosive_phi() {
        let cfg = SimplifiedIncomeConfig { phi: [1.0, 0.5], ..Default::default() };
        assert_eq!(simulate_simplified_income(&cfg, 10, 1).unwrap_err(), Error::ExplosivePhi(1.0));
    }

    #[test]
    fn lagged_interaction_mode() {
        let cfg = SimplifiedIncomeConfig { mode: IncomeMode::LaggedInteraction, ..Default::default() };
        let p = simulate_simplified_income(&cfg, 1000, 4).unwrap();
        for t in 2..p.len() {
            assert_eq!(p.outcome[t], p.state[t - 2] * p.shock[t - 1]);
        }
    }

    #[test]
    fn simplified_recursion_holds() {
        let cfg = SimplifiedIncomeConfig::default();
        let p = simulate_simplified_income(&cfg, 1000, 8).unwrap();
        for t in 1..p.len() {
            let expected = cfg.phi[p.binary_state(t - 1)] * p.outcome[t - 1]
                + cfg.nu
                + cfg.windfall[p.binary_state(t)] * p.shock[t];
            assert_abs_diff_eq!(p.outcome[t], expected, epsilon = 1e-12);
        }
    }
}
