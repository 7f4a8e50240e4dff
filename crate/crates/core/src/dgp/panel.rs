use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the state column is coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Binary,
    Continuous,
}

/// Aligned series produced by a simulator.
///
/// Row `t` holds `Y_t`, `X_t`, `S_t` and optionally `Z_t`. The state column
/// stores the contemporaneous state; estimators apply their own lag.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    pub outcome: Vec<f64>,
    pub shock: Vec<f64>,
    pub state: Vec<f64>,
    pub state_kind: StateKind,
    pub instrument: Option<Vec<f64>>,
    /// Named latent series (structural shocks, logistic index, labels...).
    pub latents: BTreeMap<String, Vec<f64>>,
}

impl SeriesPanel {
    pub fn new(outcome: Vec<f64>, shock: Vec<f64>, state: Vec<f64>, state_kind: StateKind) -> Result<Self> {
        let panel = Self { outcome, shock, state, state_kind, instrument: None, latents: BTreeMap::new() };
        panel.validate()?;
        Ok(panel)
    }

    pub fn with_instrument(mut self, z: Vec<f64>) -> Result<Self> {
        self.instrument = Some(z);
        self.validate()?;
        Ok(self)
    }

    pub fn with_latent(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.latents.insert(name.into(), values);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn latent(&self, name: &str) -> Result<&[f64]> {
        self.latents
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingLatents(name.to_string()))
    }

    pub fn instrument(&self) -> Result<&[f64]> {
        self.instrument.as_deref().ok_or(Error::MissingInstrument)
    }

    /// Binary state at row `t` as an index.
    pub fn binary_state(&self, t: usize) -> usize {
        usize::from(self.state[t] >= 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.outcome.len();
        let check = |name: &str, len: usize| {
            if len != n {
                Err(Error::DimensionMismatch(format!("column {name} has length {len}, expected {n}")))
            } else {
                Ok(())
            }
        };
        check("X", self.shock.len())?;
        check("S", self.state.len())?;
        if let Some(z) = &self.instrument {
            check("Z", z.len())?;
        }
        for (name, v) in &self.latents {
            check(name, v.len())?;
        }
        if self.state_kind == StateKind::Binary && self.state.iter().any(|&s| s != 0.0 && s != 1.0) {
            return Err(Error::InvalidConfig("binary state column contains values other than 0/1".into()));
        }
        Ok(())
    }

    /// CSV with header `t,Y,X,S[,Z,<latents>]`, floats at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut header = String::from("t,Y,X,S");
        if self.instrument.is_some() {
            header.push_str(",Z");
        }
        for name in self.latents.keys() {
            header.push(',');
            header.push_str(name);
        }
        let mut out = header;
        out.push('\n');
        for t in 0..self.len() {
            let _ = write!(out, "{t},{:.16e},{:.16e},{:.16e}", self.outcome[t], self.shock[t], self.state[t]);
            if let Some(z) = &self.instrument {
                let _ = write!(out, ",{:.16e}", z[t]);
            }
            for v in self.latents.values() {
                let _ = write!(out, ",{:.16e}", v[t]);
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`SeriesPanel::to_csv`]. The state is read as binary when
    /// every value is 0 or 1.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Csv("empty input".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if header.len() < 4 || header[..4] != ["t", "Y", "X", "S"] {
            return Err(Error::Csv(format!("unexpected header {header:?}")));
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(Error::Csv(format!("row {} has {} fields", lineno + 1, fields.len())));
            }
            for (col, f) in columns.iter_mut().zip(fields) {
                col.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Csv(format!("row {}: {e}", lineno + 1)))?,
                );
            }
        }
        let mut cols = columns.into_iter();
        let _t = cols.next();
        let outcome = cols.next().unwrap();
        let shock = cols.next().unwrap();
        let state = cols.next().unwrap();
        let kind = if state.iter().all(|&s| s == 0.0 || s == 1.0) {
            StateKind::Binary
        } else {
            StateKind::Continuous
        };
        let mut panel = SeriesPanel::new(outcome, shock, state, kind)?;
        for (name, values) in header[4..].iter().zip(cols) {
            if *name == "Z" {
                panel.instrument = Some(values);
            } else {
                panel.latents.insert(name.to_string(), values);
            }
        }
        panel.validate()?;
        Ok(panel)
    }
}
