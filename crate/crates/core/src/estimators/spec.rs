use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel used by [`InteractionKind::KernelWeight`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    pub fn weight(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp(),
            Kernel::Epanechnikov => (0.75 * (1.0 - u * u)).max(0.0),
        }
    }
}

/// The function `f` of the lagged state that multiplies the shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionKind {
    /// `f = 1`: a plain linear LP.
    Constant,
    /// `f(s) = (1, s)`.
    Linear,
    /// `f(s) = (1, 1[s >= threshold])`; coefficients are the low-state
    /// effect and the high-minus-low difference.
    Binary { threshold: f64 },
    /// `f(s) = (1, 1 / (1 + exp(steepness (s - center))))`.
    Logistic { steepness: f64, center: f64 },
    /// `f(s) = (1, s, ..., s^degree)`.
    Polynomial { degree: usize },
    /// Locally weighted LP around `target`. Order 0 is the Nadaraya-Watson
    /// limit, order 1 the local linear fit. Bandwidth defaults to half the
    /// sample sd of the state.
    KernelWeight {
        target: f64,
        #[serde(default)]
        bandwidth: Option<f64>,
        kernel: Kernel,
        order: u8,
    },
    /// `f(s) = (1, g(s))` with `g` linearly interpolated from a table and
    /// held constant beyond its ends.
    CustomGrid { knots: Vec<f64>, values: Vec<f64> },
}

fn default_lag() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    #[serde(flatten)]
    pub kind: InteractionKind,
    /// The regression at `t` uses `S_{t - state_lag}`.
    #[serde(default = "default_lag")]
    pub state_lag: usize,
}

impl InteractionSpec {
    pub fn new(kind: InteractionKind) -> Self {
        Self { kind, state_lag: 1 }
    }

    pub fn constant() -> Self {
        Self::new(InteractionKind::Constant)
    }

    pub fn linear() -> Self {
        Self::new(InteractionKind::Linear)
    }

    pub fn binary(threshold: f64) -> Self {
        Self::new(InteractionKind::Binary { threshold })
    }

    pub fn polynomial(degree: usize) -> Self {
        Self::new(InteractionKind::Polynomial { degree })
    }

    pub fn with_lag(mut self, state_lag: usize) -> Self {
        self.state_lag = state_lag;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match &self.kind {
            InteractionKind::Polynomial { degree } if *degree == 0 => bad("polynomial degree must be at least 1"),
            InteractionKind::KernelWeight { bandwidth: Some(b), .. } if !(*b > 0.0) => {
                bad("kernel bandwidth must be positive")
            }
            InteractionKind::KernelWeight { order, .. } if *order > 1 => bad("kernel order must be 0 or 1"),
            InteractionKind::KernelWeight { target, .. } if !target.is_finite() => bad("kernel target must be finite"),
            InteractionKind::Logistic { steepness, center } if !(steepness.is_finite() && center.is_finite()) => {
                bad("logistic parameters must be finite")
            }
            InteractionKind::CustomGrid { knots, values } => {
                if knots.len() != values.len() || knots.is_empty() {
                    bad("custom grid needs matching, non-empty knots and values")
                } else if knots.windows(2).any(|w| !(w[1] > w[0])) {
                    bad("custom grid knots must be strictly increasing")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn is_kernel(&self) -> bool {
        matches!(self.kind, InteractionKind::KernelWeight { .. })
    }

    /// Number of interaction terms.
    pub fn dim(&self) -> usize {
        match &self.kind {
            InteractionKind::Constant => 1,
            InteractionKind::Polynomial { degree } => degree + 1,
            InteractionKind::KernelWeight { order, .. } => 1 + *order as usize,
            _ => 2,
        }
    }

    /// `f(s)` for the fixed-function kinds. For kernel specs this returns the
    /// local basis `(1, s - target)` truncated to the order.
    pub fn basis(&self, s: f64) -> Vec<f64> {
        match &self.kind {
            InteractionKind::Constant => vec![1.0],
            InteractionKind::Linear => vec![1.0, s],
            InteractionKind::Binary { threshold } => vec![1.0, if s >= *threshold { 1.0 } else { 0.0 }],
            InteractionKind::Logistic { steepness, center } => {
                vec![1.0, 1.0 / (1.0 + (steepness * (s - center)).exp())]
            }
            InteractionKind::Polynomial { degree } => {
                let mut out = Vec::with_capacity(degree + 1);
                let mut v = 1.0;
                for _ in 0..=*degree {
                    out.push(v);
                    v *= s;
                }
                out
            }
            InteractionKind::KernelWeight { target, order, .. } => {
                if *order == 0 {
                    vec![1.0]
                } else {
                    vec![1.0, s - target]
                }
            }
            InteractionKind::CustomGrid { knots, values } => vec![1.0, interpolate(knots, values, s)],
        }
    }

    /// Effect implied by `coefficients` at state `s`. For kernel specs the
    /// fit is local, so this is the intercept term regardless of `s`.
    pub fn evaluate(&self, coefficients: &[f64], s: f64) -> f64 {
        if self.is_kernel() {
            return coefficients[0];
        }
        self.basis(s).iter().zip(coefficients).map(|(f, b)| f * b).sum()
    }
}

fn interpolate(knots: &[f64], values: &[f64], s: f64) -> f64 {
    if s <= knots[0] {
        return values[0];
    }
    let last = knots.len() - 1;
    if s >= knots[last] {
        return values[last];
    }
    let i = knots.partition_point(|&k| k <= s) - 1;
    let w = (s - knots[i]) / (knots[i + 1] - knots[i]);
    values[i] * (1.0 - w) + values[i + 1] * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bases() {
        assert_eq!(InteractionSpec::binary(0.8).basis(0.8), vec![1.0, 1.0]);
        assert_eq!(InteractionSpec::binary(0.8).basis(0.79), vec![1.0, 0.0]);
        assert_eq!(InteractionSpec::polynomial(3).basis(2.0), vec![1.0, 2.0, 4.0, 8.0]);
        let grid = InteractionSpec::new(InteractionKind::CustomGrid { knots: vec![0.0, 1.0], values: vec![2.0, 4.0] });
        assert_eq!(grid.basis(0.25)[1], 2.5);
        assert_eq!(grid.basis(-3.0)[1], 2.0);
        assert_eq!(grid.basis(9.0)[1], 4.0);
        let logistic = InteractionSpec::new(InteractionKind::Logistic { steepness: 1.5, center: 0.0 });
        assert_eq!(logistic.basis(0.0)[1], 0.5);
    }

    #[test]
    fn validation() {
        assert!(InteractionSpec::polynomial(0).validate().is_err());
        let k = |b| {
            InteractionSpec::new(InteractionKind::KernelWeight {
                target: 0.0,
                bandwidth: Some(b),
                kernel: Kernel::Gaussian,
                order: 0,
            })
        };
        assert!(k(0.0).validate().is_err());
        assert!(k(1.0).validate().is_ok());
        let grid = InteractionSpec::new(InteractionKind::CustomGrid { knots: vec![1.0, 0.0], values: vec![0.0, 0.0] });
        assert!(grid.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let spec = InteractionSpec::new(InteractionKind::KernelWeight {
            target: 0.5,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            order: 1,
        })
        .with_lag(2);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<InteractionSpec>(&json).unwrap(), spec);
        let parsed: InteractionSpec = serde_json::from_str(r#"{"kind":"binary","threshold":0.8}"#).unwrap();
        assert_eq!(parsed, InteractionSpec::binary(0.8));
    }

    #[test]
    fn kernels() {
        assert_eq!(Kernel::Gaussian.weight(0.0), 1.0);
        assert_eq!(Kernel::Epanechnikov.weight(1.5), 0.0);
        assert_eq!(Kernel::Epanechnikov.weight(0.0), 0.75);
    }
}
