use std::fmt::Write as _;

use nalgebra::DVector;

use crate::dgp::{SeriesPanel, StvarModel};
use crate::error::{Error, Result};
use crate::numerics::cholesky_derivative;

/// Marginal effect of the first structural shock at `t` on the outcome at
/// `t + horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectRecord {
    pub t: usize,
    pub horizon: usize,
    pub value: f64,
    /// `S_{t-1}`.
    pub state_lag1: f64,
}

/// Derivatives of `Y_t, ..., Y_{t+max_h}` (full vectors) with respect to the
/// first structural shock at `t`, by forward recursion along the stored
/// path. Period `t + j` depends on the shock through the lagged outcomes
/// directly and through the recession weight `F(S_{t+j-1})`, which moves the
/// lag matrices and the impact matrix.
pub fn stvar_effect_path(panel: &SeriesPanel, model: &StvarModel, t: usize, max_h: usize) -> Result<Vec<DVector<f64>>> {
    let cfg = &model.config;
    let (n, p, w, r) = (cfg.n, cfg.p, cfg.state_window, cfg.state_var_index);
    if t < p.max(1) {
        return Err(Error::SampleTooShort { rows: t, horizon: max_h });
    }
    if t + max_h >= panel.len() {
        return Err(Error::HorizonExceedsSample(max_h));
    }
    let weights = panel.latent("F")?;
    let d_omega = &model.omega_r - &model.omega_e;
    let d_pi: Vec<_> = (0..p).map(|k| &model.pi_r[k] - &model.pi_e[k]).collect();
    let scale = -cfg.gamma / (w as f64 * model.state_sd);

    let mut path: Vec<DVector<f64>> = Vec::with_capacity(max_h + 1);
    path.push(model.impact(weights[t])?.column(0).into_owned());
    for j in 1..=max_h {
        let f = weights[t + j];
        let lagged = |k: usize| if k <= j { Some(&path[j - k]) } else { None };
        let mut psi = DVector::zeros(n);
        for k in 1..=p {
            if let Some(prev) = lagged(k) {
                psi += model.lag_matrix(k, f) * prev;
            }
        }
        let window_sum: f64 = (1..=w).filter_map(lagged).map(|v| v[r]).sum();
        let d_weight = f * (1.0 - f) * scale * window_sum;
        if d_weight != 0.0 {
            let mut shift = DVector::zeros(n);
            for k in 1..=p {
                shift += &d_pi[k - 1] * model.observed(panel, t + j - k)?;
            }
            let d_chol = cholesky_derivative(&model.covariance(f), &d_omega)?;
            shift += d_chol * model.shocks(panel, t + j)?;
            psi += shift * d_weight;
        }
        path.push(psi);
    }
    Ok(path)
}

fn admissible(panel: &SeriesPanel, model: &StvarModel, h: usize) -> Result<std::ops::Range<usize>> {
    let start = model.config.p.max(1);
    if start + h >= panel.len() {
        return Err(Error::HorizonExceedsSample(h));
    }
    Ok(start..panel.len() - h)
}

/// Outcome-variable effects at horizon `h` for every admissible `t`.
pub fn stvar_marginal_effects(panel: &SeriesPanel, model: &StvarModel, h: usize) -> Result<Vec<EffectRecord>> {
    Ok(stvar_marginal_effects_upto(panel, model, h)?.pop().unwrap_or_default())
}

/// Effects for horizons `0..=max_h`; entry `h` covers every `t` with
/// `t + h` inside the panel.
pub fn stvar_marginal_effects_upto(
    panel: &SeriesPanel,
    model: &StvarModel,
    max_h: usize,
) -> Result<Vec<Vec<EffectRecord>>> {
    let rows = admissible(panel, model, 0)?;
    let _ = admissible(panel, model, max_h)?;
    let out_idx = model.config.outcome_index;
    let mut out = vec![Vec::new(); max_h + 1];
    for t in rows {
        let reach = max_h.min(panel.len() - 1 - t);
        let path = stvar_effect_path(panel, model, t, reach)?;
        for (h, psi) in path.iter().enumerate() {
            let value = psi[out_idx];
            if !value.is_finite() {
                return Err(Error::ExplosiveSimulation(t + h));
            }
            out[h].push(EffectRecord { t, horizon: h, value, state_lag1: panel.state[t - 1] });
        }
    }
    Ok(out)
}

/// CSV with header `t,h,effect,state_lag1`.
pub fn effects_to_csv(records: &[EffectRecord]) -> String {
    let mut out = String::from("t,h,effect,state_lag1\n");
    for r in records {
        let _ = writeln!(out, "{},{},{:.16e},{:.16e}", r.t, r.horizon, r.value, r.state_lag1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::StvarConfig;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use std::sync::OnceLock;

    fn model() -> &'static StvarModel {
        static MODEL: OnceLock<StvarModel> = OnceLock::new();
        MODEL.get_or_init(|| StvarModel::new(StvarConfig::synthetic()).unwrap())
    }

    #[test]
    fn impact_is_first_cholesky_column() {
        let m = model();
        let panel = m.simulate(400, 2).unwrap();
        let f = panel.latent("F").unwrap();
        for r in stvar_marginal_effects(&panel, m, 0).unwrap() {
            let chol = m.impact(f[r.t]).unwrap();
            assert_eq!(r.value, chol[(m.config.outcome_index, 0)]);
        }
    }

    #[test]
    fn single_regime_matches_vma_coefficients() {
        let m = StvarModel::new(StvarConfig::single_regime()).unwrap();
        let panel = m.simulate(300, 4).unwrap();
        let (n, p) = (m.config.n, m.config.p);
        // Companion form of the linear VAR.
        let mut companion = DMatrix::zeros(n * p, n * p);
        for k in 0..p {
            companion.view_mut((0, k * n), (n, n)).copy_from(&m.pi_e[k]);
        }
        for k in 1..p {
            companion.view_mut((k * n, (k - 1) * n), (n, n)).fill_with_identity();
        }
        let mut impulse = DVector::zeros(n * p);
        impulse.rows_mut(0, n).copy_from(&m.impact(0.0).unwrap().column(0));
        let mut vma = vec![];
        for _ in 0..=6 {
            vma.push(impulse[m.config.outcome_index]);
            impulse = &companion * impulse;
        }
        let all = stvar_marginal_effects_upto(&panel, &m, 6).unwrap();
        for (h, records) in all.iter().enumerate() {
            for r in records {
                assert!((r.value - vma[h]).abs() < 1e-10, "h={h} t={}", r.t);
            }
        }
    }

    #[test]
    fn matches_finite_differences() {
        let m = model();
        let panel = m.simulate(5000, 8).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let t = rng.random_range(m.history_len()..panel.len() - 10);
            let h = rng.random_range(0..=4);
            let analytic = stvar_effect_path(&panel, m, t, h).unwrap();
            let fd = m.finite_difference_effect(&panel, t, h, 1e-4).unwrap();
            for i in 0..m.n() {
                let (a, b) = (analytic[h][i], fd[i]);
                assert!((a - b).abs() <= 1e-4 * a.abs().max(1e-2), "t={t} h={h} i={i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn horizon_checks() {
        let m = model();
        let panel = m.simulate(50, 1).unwrap();
        assert_eq!(stvar_marginal_effects(&panel, m, 60).unwrap_err(), Error::HorizonExceedsSample(60));
        let mut bare = panel.clone();
        bare.latents.remove("F");
        assert_eq!(stvar_marginal_effects(&bare, m, 1).unwrap_err(), Error::MissingLatents("F".into()));
        let csv = effects_to_csv(&stvar_marginal_effects(&panel, m, 1).unwrap());
        assert!(csv.starts_with("t,h,effect,state_lag1\n"));
    }
}
