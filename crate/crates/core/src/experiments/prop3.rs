use std::collections::BTreeMap;

use super::{run_replications, sub_seeds, summary, to_value, ExperimentConfig, ExperimentOutput, Metric};
use crate::dgp::{simulate_simplified_income, IncomeMode, SimplifiedIncomeConfig};
use crate::error::Result;
use crate::estimators::{projection_residual_moment, prop3_diagnostic};
use crate::oracles::{lagged_interaction_moment_closed_form, prop3_covariance_closed_form};

/// Moments that separate the fixed-state VAR from the LP estimand.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let income = &cfg.prop3.income;
    let (r, len, _) = cfg.dims(10, 100_000, 0);
    let flat = SimplifiedIncomeConfig { phi: [income.phi[0]; 2], ..income.clone() };
    let lagged = SimplifiedIncomeConfig { mode: IncomeMode::LaggedInteraction, ..income.clone() };
    let chain = income.chain()?;
    let closed = [prop3_covariance_closed_form(income, 0)?, prop3_covariance_closed_form(income, 1)?];
    let lagged_closed =
        [lagged_interaction_moment_closed_form(&chain, 0)?, lagged_interaction_moment_closed_form(&chain, 1)?];

    let reps = run_replications(cfg.worker_count(), r, cfg.seed, |_, seed| {
        let seeds = sub_seeds(seed, 3);
        let panel = simulate_simplified_income(income, len, seeds[0])?;
        let flat_panel = simulate_simplified_income(&flat, len, seeds[1])?;
        let lagged_panel = simulate_simplified_income(&lagged, len, seeds[2])?;
        let mut row = [0.0; 6];
        for s in 0..2 {
            row[s] = prop3_diagnostic(&panel, income, s)?;
            row[2 + s] = prop3_diagnostic(&flat_panel, &flat, s)?;
            row[4 + s] = projection_residual_moment(&lagged_panel, s)?;
        }
        Ok(row)
    })?;
    let col = |i: usize, shift: f64| reps.iter().map(|row| row[i] - shift).collect::<Vec<f64>>();

    let mut out = summary(cfg, (r, len, 0), to_value(&cfg.prop3));
    let m = &mut out.metrics;
    for s in 0..2 {
        m.insert(format!("moment_vs_closed_form.s{s}"), Metric::near_zero(&col(s, closed[s])));
        m.insert(format!("closed_form.s{s}"), Metric::info(closed[s], 0.0));
        m.insert(format!("equal_savings_moment.s{s}"), Metric::near_zero(&col(2 + s, 0.0)));
        m.insert(format!("lagged_interaction_moment.s{s}"), Metric::away_from_zero(&col(4 + s, 0.0)));
        m.insert(
            format!("lagged_interaction_vs_closed_form.s{s}"),
            Metric::near_zero(&col(4 + s, lagged_closed[s])),
        );
    }
    m.insert("moment_nonzero.s0".into(), Metric::away_from_zero(&col(0, 0.0)));
    Ok(ExperimentOutput::new(out, BTreeMap::new()))
}
