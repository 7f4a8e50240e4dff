use std::collections::BTreeMap;

use super::{summary, to_value, ExperimentConfig, ExperimentOutput, Metric};
use crate::dgp::solve_dsge_savings;
use crate::error::Result;

/// Solves the household problem once and checks the savings rates and Euler
/// residuals.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = &cfg.dsge_solver;
    let sol = solve_dsge_savings(&params.dsge)?;
    let mut out = summary(cfg, (1, 0, 0), to_value(params));
    let m = &mut out.metrics;
    m.insert("euler_residual".into(), Metric::below(sol.euler_residual, 0.0, params.euler_tolerance));
    for s in 0..2 {
        m.insert(
            format!("savings_rate.s{s}"),
            Metric::within(sol.savings[s], params.expected_savings[s], params.savings_tolerance),
        );
        m.insert(format!("consumption_share.s{s}"), Metric::info(sol.consumption_share[s], 0.0));
    }
    m.insert("iterations".into(), Metric::info(sol.iterations as f64, 0.0));
    Ok(ExperimentOutput::new(out, BTreeMap::new()))
}
