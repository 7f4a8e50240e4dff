use crate::dgp::{DsgeConfig, MarkovChain, SimplifiedIncomeConfig};
use crate::error::{Error, Result};

/// Largest horizon for which state paths are enumerated.
pub const MAX_ENUMERATION_HORIZON: usize = 20;

/// Impulse response of `Y_t = rho Y_{t-1} + X_t + gamma X_{t-1}`.
pub fn arma_true_irf(rho: f64, gamma: f64, h: i64) -> Result<f64> {
    match h {
        h if h < 0 => Err(Error::NegativeHorizon(h)),
        0 => Ok(1.0),
        h => Ok((1..h).fold(rho + gamma, |acc, _| acc * rho)),
    }
}

/// Two-state income recursion `Y_t = A(S_t) phi(S_{t-1}) Y_{t-1} + nu +
/// windfall(S_t) X_t` reduced to what the effect of `X_t` depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomeDynamics {
    pub chain: MarkovChain,
    pub productivity: [f64; 2],
    pub savings: [f64; 2],
    pub windfall: [f64; 2],
}

impl IncomeDynamics {
    pub fn from_dsge(cfg: &DsgeConfig, savings: [f64; 2]) -> Result<Self> {
        Ok(Self {
            chain: cfg.chain()?,
            productivity: [cfg.a0, cfg.a1],
            savings,
            windfall: [cfg.b0_nu, cfg.b1_nu],
        })
    }

    pub fn from_simplified(cfg: &SimplifiedIncomeConfig) -> Result<Self> {
        Ok(Self { chain: cfg.chain()?, productivity: [1.0; 2], savings: cfg.phi, windfall: cfg.windfall })
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s < 2 && self.chain.n_states() == 2 {
            Ok(())
        } else {
            Err(Error::UnknownState(s))
        }
    }

    /// Propagation factor from `Y_{t-1}` to `Y_t` given `(S_{t-1}, S_t)`.
    fn growth(&self, prev: usize, now: usize) -> f64 {
        self.productivity[now] * self.savings[prev]
    }

    /// `E[dY_{t+h}/dX_t | S_{t-1} = s]` by summing over all `2^(h+1)` state
    /// paths `(S_t, ..., S_{t+h})`.
    pub fn true_irf_enumerated(&self, s: usize, h: usize) -> Result<f64> {
        self.check_state(s)?;
        if h > MAX_ENUMERATION_HORIZON {
            return Err(Error::HorizonTooLarge { got: h, max: MAX_ENUMERATION_HORIZON });
        }
        let mut total = 0.0;
        for code in 0u32..(1 << (h + 1)) {
            let path: Vec<usize> = (0..=h).map(|j| ((code >> j) & 1) as usize).collect();
            let mut prob = self.chain.prob(s, path[0]);
            let mut value = self.windfall[path[0]];
            for j in 1..=h {
                prob *= self.chain.prob(path[j - 1], path[j]);
                value *= self.growth(path[j - 1], path[j]);
            }
            total += prob * value;
        }
        Ok(total)
    }

    /// Same quantity by backward recursion over the chain:
    /// `G_0(s') = 1`, `G_k(s') = sum_n pi(s', n) A(n) phi(s') G_{k-1}(n)`.
    pub fn true_irf(&self, s: usize, h: usize) -> Result<f64> {
        self.check_state(s)?;
        let mut g = [1.0; 2];
        for _ in 0..h {
            let mut next = [0.0; 2];
            for (prev, slot) in next.iter_mut().enumerate() {
                *slot = (0..2).map(|n| self.chain.prob(prev, n) * self.growth(prev, n) * g[n]).sum();
            }
            g = next;
        }
        Ok((0..2).map(|n| self.chain.prob(s, n) * self.windfall[n] * g[n]).sum())
    }

    /// Response averaged over the stationary distribution of `S_{t-1}`.
    pub fn true_irf_unconditional(&self, h: usize) -> Result<f64> {
        let pi = self.chain.stationary();
        Ok(self.true_irf(0, h)? * pi[0] + self.true_irf(1, h)? * pi[1])
    }
}

/// Path-enumeration response for the full income model with savings rates
/// `savings`.
pub fn dsge_true_irf(cfg: &DsgeConfig, savings: [f64; 2], s: usize, h: usize) -> Result<f64> {
    IncomeDynamics::from_dsge(cfg, savings)?.true_irf_enumerated(s, h)
}

/// `Cov[phi(S_t), windfall(S_t) | S_{t-1} = s]` times `V[X_t] = 1`.
pub fn prop3_covariance_closed_form(cfg: &SimplifiedIncomeConfig, s: usize) -> Result<f64> {
    let chain = cfg.chain()?;
    if s >= 2 {
        return Err(Error::UnknownState(s));
    }
    Ok(chain.prob(s, 0) * chain.prob(s, 1) * (cfg.phi[0] - cfg.phi[1]) * (cfg.windfall[0] - cfg.windfall[1]))
}

/// For `Y_t = S_{t-2} X_{t-1}` with a stationary binary chain, the
/// one-lag state-conditioned projection leaves the residual
/// `(S_{t-1} - E[S_{t-1} | S_t]) X_t` in the `Y_{t+1}` equation. Returns
/// its covariance with `X_t` conditional on `S_{t-1} = s`.
pub fn lagged_interaction_moment_closed_form(chain: &MarkovChain, s: usize) -> Result<f64> {
    if chain.n_states() != 2 || s >= 2 {
        return Err(Error::UnknownState(s));
    }
    let pi = chain.stationary();
    // Backward conditional P(S_{t-1} = 1 | S_t = n).
    let backward = |n: usize| {
        let num = pi[1] * chain.prob(1, n);
        num / (num + pi[0] * chain.prob(0, n))
    };
    let expected: f64 = (0..2).map(|n| chain.prob(s, n) * backward(n)).sum();
    Ok(s as f64 - expected)
}
