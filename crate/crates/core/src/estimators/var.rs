use nalgebra::{DMatrix, DVector};

use crate::dgp::{MarkovChain, SeriesPanel, StateKind};
use crate::error::{Error, Result};
use crate::numerics::LeastSquares;

/// Each regime needs at least this many rows per equation parameter.
pub const MIN_ROWS_PER_PARAMETER: usize = 10;

/// Position of the outcome in the stacked vector `(X_t, Y_t)`.
pub const OUTCOME_INDEX: usize = 1;
const N_VARS: usize = 2;

/// Reduced-form VAR for one value of the conditioning state.
#[derive(Debug, Clone, PartialEq)]
pub struct VarRegime {
    pub intercept: DVector<f64>,
    /// `lags[k - 1]` multiplies the `k`-th lag.
    pub lags: Vec<DMatrix<f64>>,
    /// Lower triangular with unit diagonal. Column 0 holds the projection of
    /// each variable on the contemporaneous shock `X_t`.
    pub impact: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub n_obs: usize,
}

impl VarRegime {
    pub fn companion(&self) -> DMatrix<f64> {
        let n = self.intercept.len();
        let p = self.lags.len();
        let mut c = DMatrix::zeros(n * p, n * p);
        for (k, m) in self.lags.iter().enumerate() {
            c.view_mut((0, k * n), (n, n)).copy_from(m);
        }
        for k in 1..p {
            c.view_mut((k * n, (k - 1) * n), (n, n)).fill_with_identity();
        }
        c
    }

    /// Impact of a unit `X_t` on the stacked state of the companion system.
    pub fn shock_impulse(&self) -> DVector<f64> {
        let n = self.intercept.len();
        let mut v = DVector::zeros(n * self.lags.len());
        v.rows_mut(0, n).copy_from(&self.impact.column(0));
        v
    }
}

/// VAR in `(X_t, Y_t)` fitted separately for each value of `S_{t - state_lag}`,
/// or pooled over all rows when `state_lag` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub n: usize,
    pub p: usize,
    pub state_lag: Option<usize>,
    pub regimes: Vec<VarRegime>,
}

impl VarModel {
    pub fn regime(&self, s: usize) -> Result<&VarRegime> {
        match self.state_lag {
            None => Ok(&self.regimes[0]),
            Some(_) => self.regimes.get(s).ok_or(Error::UnknownState(s)),
        }
    }
}

fn stacked(panel: &SeriesPanel, t: usize) -> [f64; N_VARS] {
    [panel.shock[t], panel.outcome[t]]
}

fn fit_regime(panel: &SeriesPanel, p: usize, rows: &[usize]) -> Result<VarRegime> {
    let n = N_VARS;
    let k = 1 + n * p;
    let mut design = DMatrix::zeros(rows.len(), k);
    let mut response = DMatrix::zeros(rows.len(), n);
    for (i, &t) in rows.iter().enumerate() {
        design[(i, 0)] = 1.0;
        for lag in 1..=p {
            let w = stacked(panel, t - lag);
            for j in 0..n {
                design[(i, 1 + (lag - 1) * n + j)] = w[j];
            }
        }
        let w = stacked(panel, t);
        for j in 0..n {
            response[(i, j)] = w[j];
        }
    }
    let ls = LeastSquares::new(design.clone())?;
    let coef = ls.solve_many(&response)?;
    let resid = &response - &design * &coef;
    let dof = rows.len().saturating_sub(k).max(1) as f64;
    let sigma = resid.tr_mul(&resid) / dof;

    let intercept = coef.row(0).transpose();
    let lags = (0..p).map(|lag| coef.rows(1 + lag * n, n).transpose()).collect();

    // Projection of each variable on X_t with an intercept, within the rows.
    let count = rows.len() as f64;
    let x_mean = rows.iter().map(|&t| panel.shock[t]).sum::<f64>() / count;
    let x_var: f64 = rows.iter().map(|&t| (panel.shock[t] - x_mean).powi(2)).sum();
    if !(x_var > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let mut impact = DMatrix::identity(n, n);
    for j in 1..n {
        let mean = rows.iter().map(|&t| stacked(panel, t)[j]).sum::<f64>() / count;
        let cov: f64 = rows.iter().map(|&t| (panel.shock[t] - x_mean) * (stacked(panel, t)[j] - mean)).sum();
        impact[(j, 0)] = cov / x_var;
    }
    Ok(VarRegime { intercept, lags, impact, sigma, n_obs: rows.len() })
}

/// Fits one VAR(p) per binary state of `S_{t - state_lag}` over all usable
/// rows.
pub fn fit_state_var(panel: &SeriesPanel, p: usize, state_lag: usize) -> Result<VarModel> {
    fit_state_var_on(panel, p, Some(state_lag), None)
}

/// As [`fit_state_var`], optionally pooled (`state_lag = None`) and restricted
/// to equation rows `t` in `[start, end)`.
pub fn fit_state_var_on(
    panel: &SeriesPanel,
    p: usize,
    state_lag: Option<usize>,
    rows: Option<(usize, usize)>,
) -> Result<VarModel> {
    if p == 0 {
        return Err(Error::InvalidConfig("VAR lag order must be positive".into()));
    }
    if state_lag.is_some() && panel.state_kind != StateKind::Binary {
        return Err(Error::UnsupportedSpec("state-conditioned VAR needs a binary state".into()));
    }
    let (lo, hi) = rows.unwrap_or((0, usize::MAX));
    let start = lo.max(p).max(state_lag.unwrap_or(0));
    let end = hi.min(panel.len());
    let need = MIN_ROWS_PER_PARAMETER * (N_VARS * p + 1);
    let n_regimes = if state_lag.is_some() { 2 } else { 1 };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n_regimes];
    for t in start..end.max(start) {
        let s = state_lag.map_or(0, |k| panel.binary_state(t - k));
        buckets[s].push(t);
    }
    let mut regimes = Vec::with_capacity(n_regimes);
    for (s, rows) in buckets.iter().enumerate() {
        if rows.len() < need {
            return Err(Error::InsufficientStateObservations { state: s, got: rows.len(), need });
        }
        regimes.push(fit_regime(panel, p, rows)?);
    }
    Ok(VarModel { n: N_VARS, p, state_lag, regimes })
}

/// Response holding the state fixed at `s`: outcome entry of
/// `C(s)^h a(s)`, `h = 0..=max_h`.
pub fn irf_fixed(model: &VarModel, s: usize, max_h: usize) -> Result<Vec<f64>> {
    let regime = model.regime(s)?;
    let c = regime.companion();
    let mut v = regime.shock_impulse();
    let mut out = Vec::with_capacity(max_h + 1);
    for _ in 0..=max_h {
        out.push(v[OUTCOME_INDEX]);
        v = &c * v;
    }
    Ok(out)
}

/// Response averaging the companion products over Markov state paths:
/// outcome entry of `M_h(s) a(s)` with `M_0 = I` and
/// `M_k(s) = sum_{s'} pi(s, s') M_{k-1}(s') C(s')`.
pub fn irf_moving(model: &VarModel, chain: &MarkovChain, s: usize, max_h: usize) -> Result<Vec<f64>> {
    if model.state_lag.is_none() || chain.n_states() != model.regimes.len() {
        return Err(Error::StateSpaceMismatch { chain: chain.n_states(), model: model.regimes.len() });
    }
    let k = model.regimes.len();
    if s >= k {
        return Err(Error::UnknownState(s));
    }
    let companions: Vec<DMatrix<f64>> = model.regimes.iter().map(VarRegime::companion).collect();
    let dim = companions[0].nrows();
    let mut m: Vec<DMatrix<f64>> = vec![DMatrix::identity(dim, dim); k];
    let impulse = model.regimes[s].shock_impulse();
    let mut out = Vec::with_capacity(max_h + 1);
    out.push(impulse[OUTCOME_INDEX]);
    for _ in 1..=max_h {
        let prev_c: Vec<DMatrix<f64>> = (0..k).map(|sp| &m[sp] * &companions[sp]).collect();
        m = (0..k)
            .map(|from| {
                let mut acc = DMatrix::zeros(dim, dim);
                for (to, pc) in prev_c.iter().enumerate() {
                    acc += pc * chain.prob(from, to);
                }
                acc
            })
            .collect();
        out.push((&m[s] * &impulse)[OUTCOME_INDEX]);
    }
    Ok(out)
}

/// Response built from VARs whose conditioning state is shifted back one
/// period per horizon: `a_0 = A^0(s) e_1`,
/// `a_h = sum_{l=1}^{min(h,p)} Pi^h_l(s) a_{h-l}`, where `Pi^h_l` is lag `l`
/// of `models[h]`. Matches the binary-state LP up to sampling noise when
/// `p >= max_h` and model `h` uses the LP rows shifted by `h`.
pub fn irf_backshift(models: &[VarModel], s: usize, max_h: usize) -> Result<Vec<f64>> {
    if models.len() < max_h + 1 {
        return Err(Error::ModelSequenceMismatch(format!("need {} models, got {}", max_h + 1, models.len())));
    }
    let base = models[0]
        .state_lag
        .ok_or_else(|| Error::ModelSequenceMismatch("models must be state conditioned".into()))?;
    for (h, m) in models.iter().enumerate().take(max_h + 1) {
        if m.n != models[0].n || m.p != models[0].p {
            return Err(Error::ModelSequenceMismatch(format!("model {h} has different dimensions")));
        }
        if m.state_lag != Some(base + h) {
            return Err(Error::ModelSequenceMismatch(format!(
                "model {h} conditions on lag {:?}, expected {}",
                m.state_lag,
                base + h
            )));
        }
    }
    let p = models[0].p;
    let mut responses: Vec<DVector<f64>> = vec![models[0].regime(s)?.impact.column(0).into_owned()];
    for h in 1..=max_h {
        let regime = models[h].regime(s)?;
        let mut a = DVector::zeros(models[0].n);
        for l in 1..=h.min(p) {
            a += &regime.lags[l - 1] * &responses[h - l];
        }
        responses.push(a);
    }
    Ok(responses.iter().map(|a| a[OUTCOME_INDEX]).collect())
}
