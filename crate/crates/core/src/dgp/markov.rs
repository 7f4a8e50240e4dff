use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Finite-state Markov chain with row-stochastic transition matrix
/// `transition[i][j] = P(S_{t+1} = j | S_t = i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChain", into = "RawChain")]
pub struct MarkovChain {
    transition: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawChain {
    transition: Vec<Vec<f64>>,
}

impl TryFrom<RawChain> for MarkovChain {
    type Error = Error;
    fn try_from(raw: RawChain) -> Result<Self> {
        MarkovChain::new(raw.transition)
    }
}

impl From<MarkovChain> for RawChain {
    fn from(chain: MarkovChain) -> Self {
        RawChain { transition: chain.transition }
    }
}

impl MarkovChain {
    pub fn new(transition: Vec<Vec<f64>>) -> Result<Self> {
        let n = transition.len();
        if n == 0 {
            return Err(Error::InvalidTransition("empty state space".into()));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTransition(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|&p| !p.is_finite() || !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidTransition(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidTransition(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { transition })
    }

    /// Two-state chain from the staying probabilities.
    pub fn two_state(stay0: f64, stay1: f64) -> Result<Self> {
        Self::new(vec![vec![stay0, 1.0 - stay0], vec![1.0 - stay1, stay1]])
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[from][to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.transition[from]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_states();
        DMatrix::from_fn(n, n, |i, j| self.transition[i][j])
    }

    /// Stationary distribution. For reducible chains, where it is not unique,
    /// returns the long-run average starting from the uniform distribution.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.n_states();
        let p = self.matrix();
        let mut system = p.transpose() - DMatrix::identity(n, n);
        system.row_mut(n - 1).fill(1.0);
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let lu = system.lu();
        if let Some(x) = lu.solve(&rhs) {
            if x.iter().all(|&v| v.is_finite() && v > -1e-12) {
                let s: f64 = x.iter().map(|v| v.max(0.0)).sum();
                return x.iter().map(|v| v.max(0.0) / s).collect();
            }
        }
        let steps = 5000;
        let mut dist = DVector::from_element(n, 1.0 / n as f64);
        let mut avg = DVector::zeros(n);
        let pt = p.transpose();
        for _ in 0..steps {
            avg += &dist;
            dist = &pt * dist;
        }
        (avg / steps as f64).iter().copied().collect()
    }

    /// Draws the successor of `from`.
    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        draw_index(&self.transition[from], rng)
    }

    /// Path of length `len` whose first element is drawn from the stationary
    /// distribution.
    pub fn sample_path<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let mut path = Vec::with_capacity(len);
        if len == 0 {
            return path;
        }
        let mut s = draw_index(&self.stationary(), rng);
        path.push(s);
        for _ in 1..len {
            s = self.step(s, rng);
            path.push(s);
        }
        path
    }
}

pub(crate) fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn simulate_markov(chain: &MarkovChain, len: usize, seed: u64) -> Vec<usize> {
    chain.sample_path(len, &mut super::seeded_rng(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_rows() {
        assert!(MarkovChain::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(MarkovChain::new(vec![vec![1.2, -0.2], vec![0.5, 0.5]]).is_err());
        assert!(MarkovChain::new(vec![vec![1.0], vec![1.0]]).is_err());
        assert!(serde_json::from_str::<MarkovChain>(r#"{"transition":[[0.9,0.2],[0.5,0.5]]}"#).is_err());
    }

    #[test]
    fn stationary_two_state() {
        let c = MarkovChain::two_state(0.85, 0.8).unwrap();
        let pi = c.stationary();
        assert_abs_diff_eq!(pi[0], 0.2 / 0.35, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 0.15 / 0.35, epsilon = 1e-12);
        let id = MarkovChain::two_state(1.0, 1.0).unwrap();
        let pi = id.stationary();
        assert_abs_diff_eq!(pi[0] + pi[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn absorbing_chain_stays_put() {
        let c = MarkovChain::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let path = simulate_markov(&c, 200, 3);
        assert!(path.iter().all(|&s| s == path[0]));
    }

    #[test]
    fn empirical_frequencies_match() {
        let c = MarkovChain::two_state(0.85, 0.8).unwrap();
        let path = simulate_markov(&c, 200_000, 11);
        let mut counts = [[0usize; 2]; 2];
        for w in path.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        let p00 = counts[0][0] as f64 / (counts[0][0] + counts[0][1]) as f64;
        let p11 = counts[1][1] as f64 / (counts[1][0] + counts[1][1]) as f64;
        assert_abs_diff_eq!(p00, 0.85, epsilon = 0.01);
        assert_abs_diff_eq!(p11, 0.8, epsilon = 0.01);
    }

    #[test]
    fn same_seed_same_path() {
        let c = MarkovChain::two_state(0.7, 0.6).unwrap();
        assert_eq!(simulate_markov(&c, 500, 9), simulate_markov(&c, 500, 9));
    }
}
