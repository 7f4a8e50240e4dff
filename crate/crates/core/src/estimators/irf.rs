use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// Source of an impulse response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IrfEstimator {
    True,
    Lp,
    VarFixed,
    VarMoving,
    VarBackshift,
}

impl IrfEstimator {
    pub const ALL: [IrfEstimator; 5] =
        [IrfEstimator::True, IrfEstimator::Lp, IrfEstimator::VarFixed, IrfEstimator::VarMoving, IrfEstimator::VarBackshift];

    pub fn label(self) -> &'static str {
        match self {
            IrfEstimator::True => "TRUE",
            IrfEstimator::Lp => "LP",
            IrfEstimator::VarFixed => "VAR_FIXED",
            IrfEstimator::VarMoving => "VAR_MOVING",
            IrfEstimator::VarBackshift => "VAR_BACKSHIFT",
        }
    }
}

impl fmt::Display for IrfEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Conditioning state of a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrfState {
    State(usize),
    Unconditional,
}

impl fmt::Display for IrfState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrfState::State(s) => write!(f, "{s}"),
            IrfState::Unconditional => f.write_str("unconditional"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrfPoint {
    pub value: f64,
    pub mc_se: Option<f64>,
}

/// Impulse responses keyed by (state, estimator, horizon).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrfSet {
    entries: BTreeMap<(IrfState, IrfEstimator, usize), IrfPoint>,
}

impl IrfSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, state: IrfState, estimator: IrfEstimator, h: usize, value: f64, mc_se: Option<f64>) {
        self.entries.insert((state, estimator, h), IrfPoint { value, mc_se });
    }

    /// Inserts `values[h]` for every horizon.
    pub fn insert_path(&mut self, state: IrfState, estimator: IrfEstimator, values: &[f64]) {
        for (h, &v) in values.iter().enumerate() {
            self.insert(state, estimator, h, v, None);
        }
    }

    pub fn get(&self, state: IrfState, estimator: IrfEstimator, h: usize) -> Option<IrfPoint> {
        self.entries.get(&(state, estimator, h)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (IrfState, IrfEstimator, usize, IrfPoint)> + '_ {
        self.entries.iter().map(|(&(s, e, h), &p)| (s, e, h, p))
    }

    /// Element-wise mean over replications with `sd / sqrt(R)` as the
    /// Monte Carlo standard error. Keys missing from any replication are
    /// dropped.
    pub fn average(replications: &[IrfSet]) -> IrfSet {
        let mut out = IrfSet::new();
        let Some(first) = replications.first() else {
            return out;
        };
        let r = replications.len() as f64;
        for key in first.entries.keys() {
            let values: Option<Vec<f64>> =
                replications.iter().map(|set| set.entries.get(key).map(|p| p.value)).collect();
            let Some(values) = values else { continue };
            let (mean, se) = mean_and_se(&values);
            let se = if r > 1.0 { Some(se) } else { None };
            out.entries.insert(*key, IrfPoint { value: mean, mc_se: se });
        }
        out
    }

    /// CSV `h,state,estimator,value,mc_se`, sorted by horizon, then state and
    /// estimator. Missing standard errors are left blank.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<_> = self.iter().collect();
        rows.sort_by_key(|&(s, e, h, _)| (h, s, e));
        let mut out = String::from("h,state,estimator,value,mc_se\n");
        for (s, e, h, p) in rows {
            let _ = write!(out, "{h},{s},{e},{:.16e},", p.value);
            if let Some(se) = p.mc_se {
                let _ = write!(out, "{se:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Sample mean and `sd / sqrt(n)` (zero when `n < 2`).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaging_and_csv() {
        let mut a = IrfSet::new();
        let mut b = IrfSet::new();
        a.insert_path(IrfState::State(1), IrfEstimator::Lp, &[1.0, 0.5]);
        b.insert_path(IrfState::State(1), IrfEstimator::Lp, &[3.0, 0.5]);
        a.insert(IrfState::Unconditional, IrfEstimator::True, 0, 2.0, None);
        let avg = IrfSet::average(&[a, b]);
        assert_eq!(avg.len(), 2);
        let p = avg.get(IrfState::State(1), IrfEstimator::Lp, 0).unwrap();
        assert_eq!(p.value, 2.0);
        assert_eq!(p.mc_se, Some(1.0));
        let csv = avg.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "h,state,estimator,value,mc_se");
        assert!(lines[1].starts_with("0,1,LP,2.0000000000000000e0,"));
        assert!(lines[2].starts_with("1,1,LP,"));
    }

    #[test]
    fn se_of_constant_is_zero() {
        assert_eq!(mean_and_se(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_and_se(&[4.0]), (4.0, 0.0));
    }
}
