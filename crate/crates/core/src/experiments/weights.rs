use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{run_replications, summary, to_value, ExperimentConfig, ExperimentOutput, Metric};
use crate::dgp::seeded_rng;
use crate::error::Result;
use crate::weights::{omega_empirical, uniform_grid, WeightCurve};

fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn parabola(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.75 * (1.0 - x * x)
    } else {
        0.0
    }
}

struct Replication {
    gaussian_sup: f64,
    uniform_sup: f64,
    uniform_vs_density: f64,
    gaussian_mass: f64,
    uniform_mass: f64,
    curves: Option<(WeightCurve, WeightCurve)>,
}

/// Empirical weight curves of a linear regression for Gaussian and uniform
/// regressors.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = &cfg.weights;
    let (r, n, _) = cfg.dims(1, 1_000_000, 0);
    let gauss_grid = uniform_grid(-4.0, 4.0, params.grid_step)?;
    let unif_grid = uniform_grid(-1.0, 1.0, params.grid_step)?;

    let reps = run_replications(cfg.worker_count(), r, cfg.seed, |i, seed| {
        let mut rng = seeded_rng(seed);
        let normal: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let uniform: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = omega_empirical(&normal, &gauss_grid)?;
        let u = omega_empirical(&uniform, &unif_grid)?;
        Ok(Replication {
            gaussian_sup: g.sup_distance(standard_normal_pdf),
            uniform_sup: u.sup_distance(parabola),
            uniform_vs_density: u.sup_distance(|_| 0.5),
            gaussian_mass: g.integral(),
            uniform_mass: u.integral(),
            curves: (i == 0).then(|| (g, u)),
        })
    })?;

    let worst = |f: fn(&Replication) -> f64| reps.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let least = |f: fn(&Replication) -> f64| reps.iter().map(f).fold(f64::INFINITY, f64::min);
    let mut out = summary(cfg, (r, n, 0), to_value(params));
    let m = &mut out.metrics;
    m.insert("gaussian_sup_distance".into(), Metric::below(worst(|x| x.gaussian_sup), 0.0, params.gaussian_tolerance));
    m.insert("uniform_sup_distance".into(), Metric::below(worst(|x| x.uniform_sup), 0.0, params.uniform_tolerance));
    m.insert(
        "uniform_vs_uniform_density".into(),
        Metric::above(least(|x| x.uniform_vs_density), 0.0, params.uniform_separation),
    );
    m.insert("gaussian_mass".into(), Metric::within(worst(|x| x.gaussian_mass), 1.0, 0.01));
    m.insert("uniform_mass".into(), Metric::within(worst(|x| x.uniform_mass), 1.0, 0.01));

    let mut files = BTreeMap::new();
    if let Some((g, u)) = reps.into_iter().next().and_then(|rep| rep.curves) {
        files.insert("weights.csv".to_string(), g.to_csv());
        files.insert("weights_uniform.csv".to_string(), u.to_csv());
    }
    Ok(ExperimentOutput::new(out, files))
}
