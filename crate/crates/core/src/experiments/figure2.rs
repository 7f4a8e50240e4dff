use std::collections::BTreeMap;

use super::{run_replications, summary, to_value, ExperimentConfig, ExperimentOutput, Figure2Params, Metric};
use crate::dgp::{simulate_dsge, solve_dsge_savings, MarkovChain, SeriesPanel};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_state_var_on, irf_backshift, irf_fixed, irf_moving, lp_linear_with, lp_state_with, InteractionSpec,
    IrfEstimator, IrfSet, IrfState, LpOptions, VarModel,
};
use crate::oracles::IncomeDynamics;

const CONDITIONAL_ESTIMATORS: [IrfEstimator; 4] =
    [IrfEstimator::Lp, IrfEstimator::VarFixed, IrfEstimator::VarMoving, IrfEstimator::VarBackshift];

struct Replication {
    irf: IrfSet,
    /// LP responses averaged over the sample frequency of the lagged state.
    lp_weighted: Vec<f64>,
}

/// All estimators on one simulated panel. Every fit uses LP rows
/// `t in [p, T - H)`; the VAR conditioning on `S_{t-1-l}` uses the same
/// `t` shifted to equation rows `t + l`.
fn replicate(
    params: &Figure2Params,
    truth: &IrfSet,
    chain: &MarkovChain,
    len: usize,
    max_h: usize,
    seed: u64,
) -> Result<Replication> {
    let panel: SeriesPanel = simulate_dsge(&params.dsge, len, seed)?;
    let p = params.var_lags;
    if len <= p + max_h {
        return Err(Error::SampleTooShort { rows: len, horizon: max_h });
    }
    let end = len - max_h;
    let opts = LpOptions { rows: Some((p, end)), ..Default::default() };
    let lp = lp_state_with(&panel, &InteractionSpec::binary(0.5), max_h, &opts)?;
    let pooled = lp_linear_with(&panel, max_h, &opts)?;
    let models: Vec<VarModel> = (0..=max_h)
        .map(|l| fit_state_var_on(&panel, p, Some(1 + l), Some((p + l, end + l))))
        .collect::<Result<_>>()?;

    let recession_share = (p..end).filter(|&t| panel.binary_state(t - 1) == 1).count() as f64 / (end - p) as f64;
    let mut irf = truth.clone();
    let mut per_state = BTreeMap::new();
    for s in 0..2 {
        let lp_path: Vec<f64> = lp.iter().map(|r| r.evaluate_at_state(s as f64)).collect();
        per_state.insert((s, IrfEstimator::Lp), lp_path);
        per_state.insert((s, IrfEstimator::VarFixed), irf_fixed(&models[0], s, max_h)?);
        per_state.insert((s, IrfEstimator::VarMoving), irf_moving(&models[0], chain, s, max_h)?);
        per_state.insert((s, IrfEstimator::VarBackshift), irf_backshift(&models, s, max_h)?);
    }
    for ((s, est), path) in &per_state {
        irf.insert_path(IrfState::State(*s), *est, path);
    }
    let weighted = |est: IrfEstimator| -> Vec<f64> {
        (0..=max_h)
            .map(|h| (1.0 - recession_share) * per_state[&(0, est)][h] + recession_share * per_state[&(1, est)][h])
            .collect()
    };
    let pooled_path: Vec<f64> = pooled.iter().map(|r| r.coefficients[0]).collect();
    irf.insert_path(IrfState::Unconditional, IrfEstimator::Lp, &pooled_path);
    for est in [IrfEstimator::VarFixed, IrfEstimator::VarMoving, IrfEstimator::VarBackshift] {
        irf.insert_path(IrfState::Unconditional, est, &weighted(est));
    }
    Ok(Replication { irf, lp_weighted: weighted(IrfEstimator::Lp) })
}

/// True responses, LP and the three VAR constructions on the income model.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = &cfg.figure2;
    let (r, len, max_h) = cfg.dims(10, 100_000, 10);
    let sol = solve_dsge_savings(&params.dsge)?;
    let dynamics = IncomeDynamics::from_dsge(&params.dsge, sol.savings)?;
    let chain = params.dsge.chain()?;

    let mut truth = IrfSet::new();
    for h in 0..=max_h {
        for s in 0..2 {
            truth.insert(IrfState::State(s), IrfEstimator::True, h, dynamics.true_irf(s, h)?, None);
        }
        truth.insert(IrfState::Unconditional, IrfEstimator::True, h, dynamics.true_irf_unconditional(h)?, None);
    }

    let reps = run_replications(cfg.worker_count(), r, cfg.seed, |_, seed| {
        replicate(params, &truth, &chain, len, max_h, seed)
    })?;
    let sets: Vec<IrfSet> = reps.iter().map(|rep| rep.irf.clone()).collect();
    let value = |rep: &Replication, s: IrfState, e: IrfEstimator, h: usize| {
        rep.irf.get(s, e, h).map_or(f64::NAN, |p| p.value)
    };
    let diffs = |f: &dyn Fn(&Replication) -> f64| reps.iter().map(f).collect::<Vec<f64>>();

    let mut out = summary(cfg, (r, len, max_h), to_value(params));
    let m = &mut out.metrics;
    let states = [IrfState::State(0), IrfState::State(1), IrfState::Unconditional];
    for h in 0..=max_h {
        for &s in &states {
            m.insert(
                format!("lp_vs_true.h{h:02}.{s}"),
                Metric::near_zero(&diffs(&|rep| value(rep, s, IrfEstimator::Lp, h) - value(rep, s, IrfEstimator::True, h))),
            );
            m.insert(
                format!("backshift_vs_lp.h{h:02}.{s}"),
                Metric::near_zero(&diffs(&|rep| {
                    value(rep, s, IrfEstimator::VarBackshift, h) - value(rep, s, IrfEstimator::Lp, h)
                })),
            );
        }
        m.insert(
            format!("lp_weighted_vs_true.h{h:02}.unconditional"),
            Metric::near_zero(&diffs(&|rep| {
                rep.lp_weighted[h] - value(rep, IrfState::Unconditional, IrfEstimator::True, h)
            })),
        );
    }

    let gap = |rep: &Replication, e: IrfEstimator, h: usize| {
        value(rep, IrfState::State(1), e, h) - value(rep, IrfState::State(0), e, h)
    };
    let hg = params.fixed_gap_horizon;
    if hg <= max_h {
        m.insert(
            format!("fixed_gap_excess.h{hg:02}"),
            Metric::positive(&diffs(&|rep| gap(rep, IrfEstimator::VarFixed, hg) - gap(rep, IrfEstimator::True, hg))),
        );
    }

    for h in 0..=max_h {
        m.insert(
            format!("fixed_gap_abs_excess.h{h:02}"),
            Metric::info_from(&diffs(&|rep| {
                gap(rep, IrfEstimator::VarFixed, h).abs() - gap(rep, IrfEstimator::True, h).abs()
            })),
        );
    }

    let (lo, hi) = params.moving_gap_horizons;
    let mut strongest: Option<Metric> = None;
    for h in lo..=hi.min(max_h) {
        for s in 0..2 {
            let metric = Metric::away_from_zero(&diffs(&|rep| {
                value(rep, IrfState::State(s), IrfEstimator::VarMoving, h)
                    - value(rep, IrfState::State(s), IrfEstimator::Lp, h)
            }));
            let ratio = |mm: &Metric| mm.value.abs() / mm.mc_se.max(f64::MIN_POSITIVE);
            if strongest.as_ref().is_none_or(|best| ratio(&metric) > ratio(best)) {
                strongest = Some(metric.clone());
            }
            m.insert(format!("moving_vs_lp.h{h:02}.{s}"), Metric { criterion: "reported".into(), pass: None, ..metric });
        }
    }
    if let Some(best) = strongest {
        m.insert(
            "moving_vs_lp.max_deviation".into(),
            Metric { criterion: format!("some h in {lo}..={hi}: |value| > 3 mc_se"), ..best },
        );
    }

    for s in 0..2 {
        let st = IrfState::State(s);
        for est in std::iter::once(IrfEstimator::True).chain(CONDITIONAL_ESTIMATORS.into_iter().skip(1)) {
            m.insert(
                format!("impact_agreement.{}.{s}", est.label().to_lowercase()),
                Metric::near_zero(&diffs(&|rep| value(rep, st, est, 0) - value(rep, st, IrfEstimator::Lp, 0))),
            );
        }
    }
    m.insert("savings_rate.s0".into(), Metric::info(sol.savings[0], 0.0));
    m.insert("savings_rate.s1".into(), Metric::info(sol.savings[1], 0.0));

    let files = BTreeMap::from([("irf.csv".to_string(), IrfSet::average(&sets).to_csv())]);
    Ok(ExperimentOutput::new(out, files))
}
