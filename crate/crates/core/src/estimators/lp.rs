use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spec::{InteractionKind, InteractionSpec};
use crate::dgp::SeriesPanel;
use crate::error::{Error, Result};
use crate::numerics::{ols, tsls, wls, LeastSquares};
use crate::oracles::EffectRecord;

/// The conditional first stage must exceed this multiple of its standard
/// error everywhere on the sample support of the state.
pub const WEAK_FIRST_STAGE_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpOptions {
    /// Include the interaction functions `f(S)` themselves as controls. For a
    /// constant `f` this is an intercept; for binary states it demeans
    /// within each state.
    pub demean: bool,
    /// Restricts the regression to `t` in `[start, end)`, intersected with
    /// the rows available at each horizon.
    pub rows: Option<(usize, usize)>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { demean: true, rows: None }
    }
}

/// Coefficients on the shock interactions at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub horizon: usize,
    pub coefficients: Vec<f64>,
    pub spec: InteractionSpec,
    pub n_obs_used: usize,
}

impl LpResult {
    /// `f(s)' beta`.
    pub fn evaluate_at_state(&self, s: f64) -> f64 {
        self.spec.evaluate(&self.coefficients, s)
    }
}

fn usable_rows(len: usize, lag: usize, h: usize, opts: &LpOptions, min_rows: usize) -> Result<Range<usize>> {
    let (lo, hi) = opts.rows.unwrap_or((0, usize::MAX));
    let start = lo.max(lag);
    let end = hi.min(len.saturating_sub(h));
    if end < start + min_rows {
        return Err(Error::SampleTooShort { rows: end.saturating_sub(start), horizon: h });
    }
    Ok(start..end)
}

/// Lagged state `S_{t - lag}` for each row.
fn lagged_states(panel: &SeriesPanel, spec: &InteractionSpec, rows: &Range<usize>) -> Vec<f64> {
    rows.clone().map(|t| panel.state[t - spec.state_lag]).collect()
}

/// Interaction basis for each row, checking that no non-constant term is
/// constant in the sample.
fn basis_matrix(spec: &InteractionSpec, states: &[f64]) -> Result<DMatrix<f64>> {
    let d = spec.dim();
    let mut f = DMatrix::zeros(states.len(), d);
    for (i, &s) in states.iter().enumerate() {
        for (j, v) in spec.basis(s).into_iter().enumerate() {
            f[(i, j)] = v;
        }
    }
    if !spec.is_kernel() {
        for j in 1..d {
            let col = f.column(j);
            if col.max() - col.min() <= 0.0 {
                return Err(Error::DegenerateInteraction);
            }
        }
    }
    Ok(f)
}

fn kernel_weights(spec: &InteractionSpec, states: &[f64]) -> Result<Option<DVector<f64>>> {
    let InteractionKind::KernelWeight { target, bandwidth, kernel, .. } = &spec.kind else {
        return Ok(None);
    };
    let bw = match bandwidth {
        Some(b) => *b,
        None => {
            let n = states.len() as f64;
            let mean = states.iter().sum::<f64>() / n;
            let sd = (states.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            if !(sd > 0.0) {
                return Err(Error::DegenerateInteraction);
            }
            0.5 * sd
        }
    };
    Ok(Some(DVector::from_iterator(
        states.len(),
        states.iter().map(|s| if bw.is_infinite() { kernel.weight(0.0) } else { kernel.weight((s - target) / bw) }),
    )))
}

/// `[f(S) * v | f(S)]` (controls only when demeaning).
fn interacted(f: &DMatrix<f64>, v: &[f64], demean: bool) -> DMatrix<f64> {
    let (rows, d) = f.shape();
    let cols = if demean { 2 * d } else { d };
    DMatrix::from_fn(rows, cols, |i, j| if j < d { f[(i, j)] * v[i] } else { f[(i, j - d)] })
}

fn response(panel: &SeriesPanel, rows: &Range<usize>, h: usize) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.clone().map(|t| panel.outcome[t + h]))
}

/// State-dependent LP: for each `h`, regression of `Y_{t+h}` on
/// `f(S_{t-lag}) X_t`, with `f(S_{t-lag})` as controls when demeaning.
pub fn lp_state_with(panel: &SeriesPanel, spec: &InteractionSpec, max_h: usize, opts: &LpOptions) -> Result<Vec<LpResult>> {
    spec.validate()?;
    let d = spec.dim();
    let min_rows = 2 * d + 1;
    let mut cache: Option<(Range<usize>, DMatrix<f64>, Option<DVector<f64>>, Option<LeastSquares>)> = None;
    let mut out = Vec::with_capacity(max_h + 1);
    for h in 0..=max_h {
        let rows = usable_rows(panel.len(), spec.state_lag, h, opts, min_rows)?;
        if cache.as_ref().is_none_or(|c| c.0 != rows) {
            let states = lagged_states(panel, spec, &rows);
            let f = basis_matrix(spec, &states)?;
            let x: Vec<f64> = rows.clone().map(|t| panel.shock[t]).collect();
            let design = interacted(&f, &x, opts.demean);
            let weights = kernel_weights(spec, &states)?;
            let ls = if weights.is_none() { Some(map_rank(LeastSquares::new(design.clone()))?) } else { None };
            cache = Some((rows.clone(), design, weights, ls));
        }
        let (_, design, weights, ls) = cache.as_ref().unwrap();
        let y = response(panel, &rows, h);
        let coefficients = match (ls, weights) {
            (Some(ls), _) => ls.solve(&y)?,
            (None, Some(w)) => map_rank(wls(design, &y, w))?.coefficients,
            (None, None) => unreachable!(),
        };
        let n_obs_used = weights.as_ref().map_or(rows.len(), |w| w.iter().filter(|&&v| v > 0.0).count());
        out.push(LpResult { horizon: h, coefficients: coefficients.rows(0, d).iter().copied().collect(), spec: spec.clone(), n_obs_used });
    }
    Ok(out)
}

fn map_rank<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::RankDeficient { .. } => Error::DegenerateInteraction,
        other => other,
    })
}

pub fn lp_state(panel: &SeriesPanel, spec: &InteractionSpec, max_h: usize) -> Result<Vec<LpResult>> {
    lp_state_with(panel, spec, max_h, &LpOptions::default())
}

/// Linear LP of `Y_{t+h}` on `X_t` (with an intercept when demeaning).
pub fn lp_linear_with(panel: &SeriesPanel, max_h: usize, opts: &LpOptions) -> Result<Vec<LpResult>> {
    lp_state_with(panel, &InteractionSpec::constant().with_lag(0), max_h, opts)
}

pub fn lp_linear(panel: &SeriesPanel, max_h: usize) -> Result<Vec<LpResult>> {
    lp_linear_with(panel, max_h, &LpOptions::default())
}

/// State-dependent LP-IV: just-identified 2SLS with instruments
/// `f(S_{t-lag}) Z_t` for regressors `f(S_{t-lag}) X_t`.
pub fn lp_iv_state_with(panel: &SeriesPanel, spec: &InteractionSpec, max_h: usize, opts: &LpOptions) -> Result<Vec<LpResult>> {
    spec.validate()?;
    if spec.is_kernel() {
        return Err(Error::UnsupportedSpec("kernel-weighted LP-IV".into()));
    }
    let z = panel.instrument()?;
    let d = spec.dim();
    let mut out = Vec::with_capacity(max_h + 1);
    let mut checked: Option<Range<usize>> = None;
    for h in 0..=max_h {
        let rows = usable_rows(panel.len(), spec.state_lag, h, opts, 2 * d + 1)?;
        let states = lagged_states(panel, spec, &rows);
        let f = basis_matrix(spec, &states)?;
        let x: Vec<f64> = rows.clone().map(|t| panel.shock[t]).collect();
        let zz: Vec<f64> = rows.clone().map(|t| z[t]).collect();
        let instruments = interacted(&f, &zz, opts.demean);
        if checked.as_ref() != Some(&rows) {
            check_first_stage(&f, &instruments, &x)?;
            checked = Some(rows.clone());
        }
        let regressors = interacted(&f, &x, opts.demean);
        let fit = tsls(&instruments, &regressors, &response(panel, &rows, h)).map_err(|e| match e {
            Error::SingularCrossMoment => Error::WeakFirstStage { t_stat: 0.0, threshold: WEAK_FIRST_STAGE_RATIO },
            other => other,
        })?;
        out.push(LpResult {
            horizon: h,
            coefficients: fit.coefficients.rows(0, d).iter().copied().collect(),
            spec: spec.clone(),
            n_obs_used: rows.len(),
        });
    }
    Ok(out)
}

pub fn lp_iv_state(panel: &SeriesPanel, spec: &InteractionSpec, max_h: usize) -> Result<Vec<LpResult>> {
    lp_iv_state_with(panel, spec, max_h, &LpOptions::default())
}

/// Regresses `X` on the instrument interactions and evaluates the implied
/// conditional first stage `f(s)' gamma` at every sampled state, in units of
/// its homoskedastic standard error.
fn check_first_stage(f: &DMatrix<f64>, instruments: &DMatrix<f64>, x: &[f64]) -> Result<()> {
    let d = f.ncols();
    let xv = DVector::from_column_slice(x);
    let fit = ols(instruments, &xv).map_err(|e| match e {
        Error::RankDeficient { .. } => Error::WeakFirstStage { t_stat: 0.0, threshold: WEAK_FIRST_STAGE_RATIO },
        other => other,
    })?;
    let k = instruments.ncols();
    let dof = (fit.n_obs.saturating_sub(k)).max(1) as f64;
    let s2 = fit.residuals.norm_squared() / dof;
    let gram = instruments.tr_mul(instruments);
    let inv = gram.cholesky().ok_or(Error::SingularCrossMoment)?.inverse();
    let cov = inv.view((0, 0), (d, d)) * s2;
    let gamma = fit.coefficients.rows(0, d);
    let mut worst = f64::INFINITY;
    let mut seen: Vec<Vec<f64>> = Vec::new();
    for i in 0..f.nrows() {
        let row: Vec<f64> = f.row(i).iter().copied().collect();
        if d <= 2 && seen.iter().any(|r| *r == row) {
            continue;
        }
        let fv = DVector::from_column_slice(&row);
        let value = fv.dot(&gamma);
        let se = (fv.transpose() * &cov * &fv)[(0, 0)].max(0.0).sqrt();
        let t = if se > 0.0 { (value / se).abs() } else if value != 0.0 { f64::INFINITY } else { 0.0 };
        worst = worst.min(t);
        if d <= 2 && seen.len() < 64 {
            seen.push(row);
        }
    }
    if worst < WEAK_FIRST_STAGE_RATIO {
        return Err(Error::WeakFirstStage { t_stat: worst, threshold: WEAK_FIRST_STAGE_RATIO });
    }
    Ok(())
}

/// OLS of oracle effects on `f(S_{t-1})`: the projection the LP estimand
/// equals when the shock is Gaussian.
pub fn project_effects_on_states(effects: &[EffectRecord], spec: &InteractionSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.is_kernel() {
        return Err(Error::UnsupportedSpec("kernel-weighted projection".into()));
    }
    if spec.state_lag != 1 {
        return Err(Error::UnsupportedSpec("effect records carry S_{t-1} only".into()));
    }
    if effects.len() <= spec.dim() {
        return Err(Error::SampleTooSmall { got: effects.len(), need: spec.dim() + 1 });
    }
    let states: Vec<f64> = effects.iter().map(|e| e.state_lag1).collect();
    let f = basis_matrix(spec, &states)?;
    let y = DVector::from_iterator(effects.len(), effects.iter().map(|e| e.value));
    Ok(map_rank(ols(&f, &y))?.coefficients.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_arma, simulate_dsge, DsgeConfig};
    use crate::estimators::spec::Kernel;
    use proptest::prelude::*;

    fn dsge_panel() -> SeriesPanel {
        simulate_dsge(&DsgeConfig::default(), 20_000, 5).unwrap()
    }

    fn subsample(panel: &SeriesPanel, s: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
        (1..panel.len() - h).filter(|&t| panel.binary_state(t - 1) == s).map(|t| (panel.shock[t], panel.outcome[t + h])).unzip()
    }

    fn simple_slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn split_sample_identity() {
        let panel = dsge_panel();
        let res = lp_state(&panel, &InteractionSpec::binary(0.5), 4).unwrap();
        for (h, r) in res.iter().enumerate() {
            let (x0, y0) = subsample(&panel, 0, h);
            let (x1, y1) = subsample(&panel, 1, h);
            let b0 = simple_slope(&x0, &y0);
            let b1 = simple_slope(&x1, &y1);
            assert!((r.coefficients[0] - b0).abs() < 1e-10);
            assert!((r.coefficients[1] - (b1 - b0)).abs() < 1e-10);
            assert!((r.evaluate_at_state(1.0) - b1).abs() < 1e-10);
        }
    }

    #[test]
    fn infinite_bandwidth_is_linear_lp() {
        let panel = dsge_panel();
        let spec = InteractionSpec::new(InteractionKind::KernelWeight {
            target: 0.3,
            bandwidth: Some(f64::INFINITY),
            kernel: Kernel::Gaussian,
            order: 0,
        });
        let kernel = lp_state(&panel, &spec, 3).unwrap();
        let opts = LpOptions { rows: Some((1, usize::MAX)), ..Default::default() };
        let linear = lp_linear_with(&panel, 3, &opts).unwrap();
        for (a, b) in kernel.iter().zip(&linear) {
            assert!((a.coefficients[0] - b.coefficients[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_outcome_has_unit_impact() {
        let panel = simulate_arma(0.0, 0.0, 500, 3).unwrap();
        let r = lp_linear(&panel, 0).unwrap();
        assert!((r[0].coefficients[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iv_with_instrument_equal_to_regressor_is_ols() {
        let panel = dsge_panel();
        let with_z = panel.clone().with_instrument(panel.shock.clone()).unwrap();
        let spec = InteractionSpec::binary(0.5);
        let iv = lp_iv_state(&with_z, &spec, 3).unwrap();
        let ls = lp_state(&panel, &spec, 3).unwrap();
        for (a, b) in iv.iter().zip(&ls) {
            for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_and_short_samples() {
        let panel = simulate_arma(0.5, 0.0, 200, 1).unwrap();
        assert_eq!(lp_state(&panel, &InteractionSpec::linear(), 1).unwrap_err(), Error::DegenerateInteraction);
        assert!(matches!(lp_linear(&panel, 198), Err(Error::SampleTooShort { .. })));
        let no_z = lp_iv_state(&panel, &InteractionSpec::constant(), 0);
        assert_eq!(no_z.unwrap_err(), Error::MissingInstrument);
    }

    #[test]
    fn unrelated_instrument_is_weak() {
        let panel = simulate_arma(0.5, 0.0, 5000, 1).unwrap();
        let noise = simulate_arma(0.0, 0.0, 5000, 2).unwrap().shock;
        let panel = panel.with_instrument(noise).unwrap();
        assert!(matches!(lp_iv_state(&panel, &InteractionSpec::constant(), 0), Err(Error::WeakFirstStage { .. })));
    }

    #[test]
    fn projection_of_constant_effects() {
        let effects: Vec<EffectRecord> = (0..100)
            .map(|t| EffectRecord { t, horizon: 0, value: 1.25, state_lag1: (t as f64 * 0.37).sin() })
            .collect();
        for spec in [InteractionSpec::linear(), InteractionSpec::polynomial(2), InteractionSpec::binary(0.0)] {
            let c = project_effects_on_states(&effects, &spec).unwrap();
            assert!((c[0] - 1.25).abs() < 1e-10);
            assert!(c[1..].iter().all(|v| v.abs() < 1e-10));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn scale_equivariance(a in 0.1f64..10.0, seed in 0u64..1000) {
            let panel = simulate_dsge(&DsgeConfig::default(), 2000, seed).unwrap();
            let mut scaled = panel.clone();
            scaled.shock.iter_mut().for_each(|x| *x *= a);
            for spec in [InteractionSpec::binary(0.5), InteractionSpec::constant()] {
                let base = lp_state(&panel, &spec, 2).unwrap();
                let other = lp_state(&scaled, &spec, 2).unwrap();
                for (r, q) in base.iter().zip(&other) {
                    for (b, c) in r.coefficients.iter().zip(&q.coefficients) {
                        prop_assert!((b / a - c).abs() < 1e-10 * (1.0 + b.abs()));
                    }
                }
            }
        }
    }

}
