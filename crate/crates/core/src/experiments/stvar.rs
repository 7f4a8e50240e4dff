use std::collections::BTreeMap;

use rand::Rng;

use super::{run_replications, sub_seeds, summary, to_value, ExperimentConfig, ExperimentOutput, Metric, StvarParams};
use crate::dgp::{seeded_rng, StvarConfig, StvarModel};
use crate::error::Result;
use crate::estimators::{lp_state_with, project_effects_on_states, InteractionSpec, LpOptions};
use crate::oracles::{effects_to_csv, stvar_effect_path, stvar_marginal_effects_upto, EffectRecord};

struct Replication {
    /// `(spec label, h, coefficient index) -> LP minus oracle projection`.
    gaps: BTreeMap<(String, usize, usize), f64>,
    /// Oracle projection coefficients, same keys.
    oracle: BTreeMap<(String, usize, usize), f64>,
    /// Binary-spec state difference on the single-regime control, per h.
    control_difference: BTreeMap<usize, f64>,
    max_fd_error: Option<f64>,
    effects_csv: Option<String>,
}

fn specs(params: &StvarParams) -> Vec<(String, InteractionSpec)> {
    vec![
        ("binary".into(), InteractionSpec::binary(params.threshold)),
        ("linear".into(), InteractionSpec::linear()),
        (format!("polynomial{}", params.polynomial_degree), InteractionSpec::polynomial(params.polynomial_degree)),
    ]
}

/// Largest relative gap between the analytic effect and a central finite
/// difference over `pairs` randomly drawn `(t, h)`.
fn finite_difference_check(
    model: &StvarModel,
    panel: &crate::dgp::SeriesPanel,
    params: &StvarParams,
    max_h: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = seeded_rng(seed);
    let lo = model.history_len();
    let out_idx = model.config.outcome_index;
    let mut worst: f64 = 0.0;
    for _ in 0..params.fd_pairs {
        let t = rng.random_range(lo..panel.len() - max_h - 1);
        let h = rng.random_range(0..=max_h);
        let analytic = stvar_effect_path(panel, model, t, h)?[h][out_idx];
        let numeric = model.finite_difference_effect(panel, t, h, params.fd_step)?[out_idx];
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(params.fd_floor));
    }
    Ok(worst)
}

fn replicate(
    model: &StvarModel,
    control: &StvarModel,
    params: &StvarParams,
    len: usize,
    max_h: usize,
    index: usize,
    seed: u64,
) -> Result<Replication> {
    let seeds = sub_seeds(seed, 3);
    let panel = model.simulate(len, seeds[0])?;
    let effects: Vec<Vec<EffectRecord>> = stvar_marginal_effects_upto(&panel, model, max_h)?;
    // Align LP rows with the rows that have oracle effects.
    let opts = LpOptions { rows: Some((model.config.p.max(1), len)), ..Default::default() };
    let mut gaps = BTreeMap::new();
    let mut oracle = BTreeMap::new();
    for (label, spec) in specs(params) {
        let lp = lp_state_with(&panel, &spec, max_h, &opts)?;
        for &h in params.check_horizons.iter().filter(|&&h| h <= max_h) {
            let projected = project_effects_on_states(&effects[h], &spec)?;
            for (i, (b, o)) in lp[h].coefficients.iter().zip(&projected).enumerate() {
                gaps.insert((label.clone(), h, i), b - o);
                oracle.insert((label.clone(), h, i), *o);
            }
        }
    }

    let control_panel = control.simulate(len, seeds[1])?;
    let control_lp = lp_state_with(&control_panel, &InteractionSpec::binary(params.threshold), max_h, &opts)?;
    let control_difference =
        params.check_horizons.iter().filter(|&&h| h <= max_h).map(|&h| (h, control_lp[h].coefficients[1])).collect();

    let (max_fd_error, effects_csv) = if index == 0 {
        let fd = finite_difference_check(model, &panel, params, max_h, seeds[2])?;
        let records: Vec<EffectRecord> = effects.into_iter().flatten().collect();
        (Some(fd), Some(effects_to_csv(&records)))
    } else {
        (None, None)
    };
    Ok(Replication { gaps, oracle, control_difference, max_fd_error, effects_csv })
}

/// Smooth-transition VAR: analytic effects against finite differences, and
/// state-dependent LPs against projections of the analytic effects.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = &cfg.stvar;
    let (r, len, max_h) = cfg.dims(20, 20_000, 4);
    let model = StvarModel::new(params.model.clone())?;
    let mut control_cfg: StvarConfig = params.model.clone();
    control_cfg.pi_r = control_cfg.pi_e.clone();
    control_cfg.omega_r = control_cfg.omega_e.clone();
    let control = StvarModel::new(control_cfg)?;

    let reps = run_replications(cfg.worker_count(), r, cfg.seed, |i, seed| {
        replicate(&model, &control, params, len, max_h, i, seed)
    })?;

    let mut out = summary(cfg, (r, len, max_h), to_value(params));
    let m = &mut out.metrics;
    for key in reps[0].gaps.keys() {
        let (label, h, i) = key;
        let draws: Vec<f64> = reps.iter().map(|rep| rep.gaps[key]).collect();
        m.insert(format!("lp_vs_oracle.{label}.h{h}.b{i}"), Metric::near_zero(&draws));
        let oracle: Vec<f64> = reps.iter().map(|rep| rep.oracle[key]).collect();
        let (v, se) = super::mean_and_se(&oracle);
        m.insert(format!("oracle_projection.{label}.h{h}.b{i}"), Metric::info(v, se));
    }
    for h in reps[0].control_difference.keys() {
        let draws: Vec<f64> = reps.iter().map(|rep| rep.control_difference[h]).collect();
        m.insert(format!("single_regime_state_difference.h{h}"), Metric::near_zero(&draws));
    }
    if let Some(fd) = reps[0].max_fd_error {
        m.insert("finite_difference_max_relative_error".into(), Metric {
            criterion: format!("value <= {:e} over {} pairs", params.fd_tolerance, params.fd_pairs),
            pass: Some(fd <= params.fd_tolerance),
            ..Metric::info(fd, 0.0)
        });
    }
    m.insert("state_mean".into(), Metric::info(model.state_mean, 0.0));
    m.insert("state_sd".into(), Metric::info(model.state_sd, 0.0));

    let mut files = BTreeMap::new();
    if let Some(csv) = reps.into_iter().next().and_then(|rep| rep.effects_csv) {
        files.insert("effects.csv".to_string(), csv);
    }
    Ok(ExperimentOutput::new(out, files))
}
