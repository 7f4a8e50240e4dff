//! Weight curves `ω(x) = Cov[1{X ≥ x}, X] / V[X]` and the weighted average
//! effects `∫ ω(x) Ψ'(x) dx` they induce.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Minimum number of draws accepted by [`omega_empirical`].
pub const MIN_EMPIRICAL_SAMPLES: usize = 100;
/// Integral tolerance for analytic curves on a wide enough grid.
pub const ANALYTIC_MASS_TOL: f64 = 1e-3;
/// Integral tolerance for empirical curves at `n = 1e5`.
pub const EMPIRICAL_MASS_TOL: f64 = 2e-2;

/// Tabulated values on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub spacing: f64,
}

/// An effect curve `Ψ'(x)` tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl EffectCurve {
    pub fn tabulate(grid: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self { grid: grid.to_vec(), values: grid.iter().map(|&x| f(x)).collect() }
    }
}

/// `lo, lo + step, ...` up to and including `hi` (within rounding).
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidGrid(format!("lo={lo}, hi={hi}, step={step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

/// `[-6 sd, 6 sd]` with step `sd / 100`.
pub fn default_grid(sd: f64) -> Result<Vec<f64>> {
    if !(sd > 0.0) {
        return Err(Error::NonPositiveSd(sd));
    }
    uniform_grid(-6.0 * sd, 6.0 * sd, sd / 100.0)
}

fn grid_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    let spacing = grid[1] - grid[0];
    if !(spacing > 0.0) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    let scale = grid.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    for w in grid.windows(2) {
        if (w[1] - w[0] - spacing).abs() > 1e-12 * scale {
            return Err(Error::InvalidGrid("grid spacing is not constant".into()));
        }
    }
    Ok(spacing)
}

fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * spacing
}

impl WeightCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} grid points, {} values", grid.len(), values.len())));
        }
        let spacing = grid_spacing(&grid)?;
        Ok(Self { grid, values, spacing })
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.spacing)
    }

    /// Largest absolute gap to `f` over the grid points.
    pub fn sup_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| (v - f(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Sup distance restricted to grid points inside `(lo, hi)`.
    pub fn sup_distance_on(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .iter()
            .zip(&self.values)
            .filter(|(&x, _)| x > lo && x < hi)
            .map(|(&x, &v)| (v - f(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let first = self.grid[0];
        let last = *self.grid.last().unwrap();
        if x < first || x > last {
            return 0.0;
        }
        let pos = (x - first) / self.spacing;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// CSV with header `x,omega`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,omega\n");
        for (x, v) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{x:.16e},{v:.16e}");
        }
        out
    }
}

/// Plug-in estimate of `ω_X` on `grid` from draws of `X`.
///
/// Uses mean-corrected moments: `values[j] = mean(1{x_i ≥ g_j} (x_i - x̄)) /
/// mean((x_i - x̄)²)`. Tail values can be slightly negative.
pub fn omega_empirical(samples: &[f64], grid: &[f64]) -> Result<WeightCurve> {
    if samples.len() < MIN_EMPIRICAL_SAMPLES {
        return Err(Error::SampleTooSmall { got: samples.len(), need: MIN_EMPIRICAL_SAMPLES });
    }
    grid_spacing(grid)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    // suffix[i] = sum_{k >= i} (sorted[k] - mean)
    let mut suffix = vec![0.0; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        suffix[i] = suffix[i + 1] + (sorted[i] - mean);
    }
    let values = grid
        .iter()
        .map(|&x| {
            let first = sorted.partition_point(|&v| v < x);
            suffix[first] / n / var
        })
        .collect();
    WeightCurve::new(grid.to_vec(), values)
}

/// `ω_X` for `X ~ N(0, sd²)`, which is the normal density itself.
pub fn omega_gaussian(sd: f64, grid: &[f64]) -> Result<WeightCurve> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::NonPositiveSd(sd));
    }
    let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let values = grid.iter().map(|&x| norm * (-0.5 * (x / sd).powi(2)).exp()).collect();
    WeightCurve::new(grid.to_vec(), values)
}

/// `θ(ω) = ∫ ω(x) Ψ'(x) dx` by the trapezoid rule.
pub fn weighted_average_effect(effect: &EffectCurve, weights: &WeightCurve) -> Result<f64> {
    if effect.grid.len() != weights.grid.len() || effect.values.len() != effect.grid.len() {
        return Err(Error::GridMismatch);
    }
    if effect.grid.iter().zip(&weights.grid).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::GridMismatch);
    }
    let product: Vec<f64> = effect.values.iter().zip(&weights.values).map(|(e, w)| e * w).collect();
    Ok(trapezoid(&product, weights.spacing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn degenerate_and_small_samples() {
        let grid = uniform_grid(-1.0, 1.0, 0.1).unwrap();
        assert_eq!(omega_empirical(&vec![2.0; 500], &grid).unwrap_err(), Error::DegenerateSample);
        assert!(matches!(omega_empirical(&[1.0, 2.0], &grid), Err(Error::SampleTooSmall { .. })));
    }

    #[test]
    fn gaussian_values() {
        let grid = uniform_grid(-2.0, 2.0, 0.5).unwrap();
        let w = omega_gaussian(1.0, &grid).unwrap();
        assert!((w.values[4] - 0.398_942_280_401_432_7).abs() < 1e-15);
        let w2 = omega_gaussian(2.0, &grid).unwrap();
        assert!((w2.values[4] - 0.199_471_140_200_716_3).abs() < 1e-15);
        for i in 0..grid.len() {
            assert_eq!(w.values[i], w.values[grid.len() - 1 - i]);
        }
        assert_eq!(omega_gaussian(0.0, &grid).unwrap_err(), Error::NonPositiveSd(0.0));
    }

    #[test]
    fn gaussian_mass_on_default_grid() {
        for sd in [0.5, 1.0, 3.0] {
            let w = omega_gaussian(sd, &default_grid(sd).unwrap()).unwrap();
            assert!((w.integral() - 1.0).abs() < ANALYTIC_MASS_TOL);
        }
    }

    #[test]
    fn weighted_effects() {
        let grid = default_grid(1.0).unwrap();
        let w = omega_gaussian(1.0, &grid).unwrap();
        let c = weighted_average_effect(&EffectCurve::tabulate(&grid, |_| 2.5), &w).unwrap();
        assert!((c - 2.5).abs() < 1e-3);
        let odd = weighted_average_effect(&EffectCurve::tabulate(&grid, |x| x), &w).unwrap();
        assert!(odd.abs() < 1e-6);
        let step = weighted_average_effect(&EffectCurve::tabulate(&grid, |x| if x > 0.0 { 1.0 } else if x == 0.0 { 0.5 } else { 0.0 }), &w)
            .unwrap();
        assert!((step - 0.5).abs() < 1e-3);

        let other = EffectCurve::tabulate(&uniform_grid(-1.0, 1.0, 0.01).unwrap(), |_| 1.0);
        assert_eq!(weighted_average_effect(&other, &w).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn constant_effect_under_arbitrary_weights() {
        let grid = uniform_grid(-1.0, 1.0, 0.01).unwrap();
        let w = WeightCurve::new(grid.clone(), grid.iter().map(|x| 0.75 * (1.0 - x * x)).collect()).unwrap();
        let theta = weighted_average_effect(&EffectCurve::tabulate(&grid, |_| -0.3), &w).unwrap();
        assert!((theta + 0.3).abs() < 1e-3);
    }

    #[test]
    fn empirical_uniform_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let draws: Vec<f64> = (0..200_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grid = uniform_grid(-1.0, 1.0, 0.01).unwrap();
        let w = omega_empirical(&draws, &grid).unwrap();
        assert!(w.sup_distance(|x| 0.75 * (1.0 - x * x)) < 0.02);
        assert!((w.integral() - 1.0).abs() < EMPIRICAL_MASS_TOL);
    }

    #[test]
    fn empirical_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let draws: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let a = 2.0;
        let scaled: Vec<f64> = draws.iter().map(|x| a * x).collect();
        let grid = uniform_grid(-3.0, 3.0, 0.05).unwrap();
        let scaled_grid: Vec<f64> = grid.iter().map(|x| a * x).collect();
        let base = omega_empirical(&draws, &grid).unwrap();
        let big = omega_empirical(&scaled, &scaled_grid).unwrap();
        for j in 0..grid.len() {
            // same indicator sets, so the identity holds up to rounding
            assert!((big.values[j] - base.values[j] / a).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_grids() {
        assert!(WeightCurve::new(vec![0.0, 1.0, 3.0], vec![0.0; 3]).is_err());
        assert!(WeightCurve::new(vec![1.0, 0.0], vec![0.0; 2]).is_err());
    }
}
