use rand_distr::{Distribution, StandardNormal};

use super::{check_finite, seeded_rng, SeriesPanel, StateKind, BURN_IN};
use crate::error::{Error, Result};

/// `Y_t = rho Y_{t-1} + X_t + gamma X_{t-1}` with standard normal `X`. The
/// state column is identically zero.
pub fn simulate_arma(rho: f64, gamma: f64, len: usize, seed: u64) -> Result<SeriesPanel> {
    if !(rho.abs() < 1.0) {
        return Err(Error::ExplosiveRho(rho));
    }
    let mut rng = seeded_rng(seed);
    let total = BURN_IN + len;
    let mut y_prev = 0.0;
    let mut x_prev = 0.0;
    let mut outcome = Vec::with_capacity(len);
    let mut shock = Vec::with_capacity(len);
    for t in 0..total {
        let x: f64 = StandardNormal.sample(&mut rng);
        let y = rho * y_prev + x + gamma * x_prev;
        check_finite(y, t)?;
        if t >= BURN_IN {
            outcome.push(y);
            shock.push(x);
        }
        y_prev = y;
        x_prev = x;
    }
    SeriesPanel::new(outcome, shock, vec![0.0; len], StateKind::Continuous)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_case() {
        let p = simulate_arma(0.0, 0.0, 500, 1).unwrap();
        assert_eq!(p.outcome, p.shock);
    }

    #[test]
    fn rejects_unit_root() {
        assert_eq!(simulate_arma(1.0, 0.0, 10, 1).unwrap_err(), Error::ExplosiveRho(1.0));
        assert!(simulate_arma(f64::NAN, 0.0, 10, 1).is_err());
    }

    #[test]
    fn lag_one_autocovariance() {
        let (rho, gamma) = (0.5, 0.2);
        // ARMA(1,1) with unit innovation variance.
        let gamma0 = (1.0 + 2.0 * rho * gamma + gamma * gamma) / (1.0 - rho * rho);
        let gamma1 = (1.0 + rho * gamma) * (rho + gamma) / (1.0 - rho * rho);
        let n = 400_000;
        let p = simulate_arma(rho, gamma, n, 5).unwrap();
        let mean = p.outcome.iter().sum::<f64>() / n as f64;
        let prods: Vec<f64> = p.outcome.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).collect();
        let acov = prods.iter().sum::<f64>() / prods.len() as f64;
        // Long-run variance of the product series is bounded by a generous
        // multiple of gamma0^2 for this persistence.
        let se = (10.0 * gamma0 * gamma0 / prods.len() as f64).sqrt();
        assert!((acov - gamma1).abs() < 3.0 * se, "acov {acov} vs {gamma1}, se {se}");
    }
}
