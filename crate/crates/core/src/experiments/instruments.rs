use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{mean_and_se, run_replications, summary, to_value, ExperimentConfig, ExperimentOutput, Metric};
use crate::dgp::{simulate_govspend, simulate_late, GovSpendConfig};
use crate::error::Result;
use crate::estimators::{lp_iv_state, InteractionSpec};
use crate::oracles::{govspend_closed_form, govspend_decomposition, late_oracle};
use crate::weights::uniform_grid;

fn binary_iv(cfg: &GovSpendConfig, len: usize, seed: u64) -> Result<[f64; 2]> {
    let panel = simulate_govspend(cfg, len, seed)?;
    let fit = lp_iv_state(&panel, &InteractionSpec::binary(0.5), 0)?;
    Ok([fit[0].coefficients[0], fit[0].coefficients[1]])
}

/// State-dependent LP-IV on the kinked spending model, against the closed
/// form, plus a run without consolidation.
pub fn run_lpiv(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = &cfg.lpiv;
    let (r, len, _) = cfg.dims(10, 1_000_000, 0);
    let control_cfg = GovSpendConfig { consolidation: params.control_consolidation, ..params.govspend.clone() };
    let closed = govspend_closed_form(&params.govspend)?;
    let control_closed = govspend_closed_form(&control_cfg)?;

    let reps = run_replications(cfg.worker_count(), r, cfg.seed, |_, seed| {
        let main = binary_iv(&params.govspend, len, seed)?;
        let control = binary_iv(&control_cfg, len, seed ^ 0x5eed_c0de)?;
        Ok((main, control))
    })?;
    let col = |f: &dyn Fn(&([f64; 2], [f64; 2])) -> f64| reps.iter().map(f).collect::<Vec<f64>>();

    let mut out = summary(cfg, (r, len, 0), to_value(params));
    let m = &mut out.metrics;
    m.insert("beta0_vs_closed_form".into(), Metric::near_zero(&col(&|x| x.0[0] - closed.beta0)));
    m.insert("beta1_vs_closed_form".into(), Metric::near_zero(&col(&|x| x.0[1] - closed.beta1)));
    m.insert("beta1_positive".into(), Metric::positive(&col(&|x| x.0[1])));
    m.insert("control_beta1".into(), Metric::near_zero(&col(&|x| x.1[1])));
    m.insert("control_beta1_vs_closed_form".into(), Metric::near_zero(&col(&|x| x.1[1] - control_closed.beta1)));
    m.insert("closed_form.beta0".into(), Metric::info(closed.beta0, 0.0));
    m.insert("closed_form.beta1".into(), Metric::info(closed.beta1, 0.0));
    // The marginal effect of spending is the same function in both states.
    let grid = uniform_grid(params.grid_lo, params.grid_hi, params.grid_step)?;
    let decomposition = govspend_decomposition(&params.govspend, &grid)?;
    let effect_gap = decomposition.iter().map(|p| (p.effect[0] - p.effect[1]).abs()).fold(0.0, f64::max);
    m.insert("effect_curve_state_gap".into(), Metric::info(effect_gap, 0.0));

    let mut csv = String::from("z,effect_0,effect_1,omega,kappa_0,kappa_1\n");
    for p in &decomposition {
        let _ = writeln!(
            csv,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.z, p.effect[0], p.effect[1], p.omega, p.kappa[0], p.kappa[1]
        );
    }
    let files = BTreeMap::from([("decomposition.csv".to_string(), csv)]);
    Ok(ExperimentOutput::new(out, files))
}

/// Binary instrument with heterogeneous compliance: the IV estimate against
/// the complier mean effect in each sample.
pub fn run_late(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = &cfg.late;
    let (r, n, _) = cfg.dims(10, 100_000, 0);
    // A cross-section has no state to condition on, so the interaction is
    // the constant with no lag.
    let spec = InteractionSpec::constant().with_lag(0);
    let reps = run_replications(cfg.worker_count(), r, cfg.seed, |_, seed| {
        let panel = simulate_late(&params.late, n, seed)?;
        let iv = lp_iv_state(&panel, &spec, 0)?[0].coefficients[0];
        Ok((iv, late_oracle(&panel)?))
    })?;
    let mut out = summary(cfg, (r, n, 0), to_value(params));
    let m = &mut out.metrics;
    let gaps: Vec<f64> = reps.iter().map(|(iv, truth)| iv - truth).collect();
    m.insert("iv_vs_complier_mean".into(), Metric::near_zero(&gaps));
    let population: Vec<f64> = reps.iter().map(|(iv, _)| iv - params.late.effect_complier).collect();
    m.insert("iv_vs_population_complier_effect".into(), Metric::near_zero(&population));
    let (iv, se) = mean_and_se(&reps.iter().map(|x| x.0).collect::<Vec<_>>());
    m.insert("iv_estimate".into(), Metric::info(iv, se));
    m.insert("average_treatment_effect".into(), Metric::info(params.late.average_effect(), 0.0));
    Ok(ExperimentOutput::new(out, BTreeMap::new()))
}
