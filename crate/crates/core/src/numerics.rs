//! Dense least-squares and matrix-calculus kernels.
//!
//! Regressions go through a Householder QR of the design followed by an SVD
//! of the triangular factor. The singular values of `R` are those of the
//! design, so the rank check is exact up to rounding while the solve itself
//! stays on the well-conditioned triangular system.

use nalgebra::{DMatrix, DVector, Dyn, QR};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Symmetry tolerance accepted by [`cholesky_lower`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Output of a linear regression.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub coefficients: DVector<f64>,
    /// `response - design * coefficients`, one entry per row.
    pub residuals: DVector<f64>,
    pub n_obs: usize,
}

/// A QR-factorized, rank-checked design matrix that can be reused for
/// several responses.
pub struct LeastSquares {
    qr: QR<f64, Dyn, Dyn>,
    r: DMatrix<f64>,
    rows: usize,
    cols: usize,
}

impl LeastSquares {
    pub fn new(design: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = design.shape();
        if cols == 0 {
            return Err(Error::DimensionMismatch("design has no columns".into()));
        }
        if rows < cols {
            return Err(Error::RankDeficient { rank: rows, cols });
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch("design contains non-finite values".into()));
        }
        let qr = design.qr();
        let r = qr.r();
        let sv = r.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0_f64, f64::max);
        let rank = sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count();
        if max == 0.0 || rank < cols {
            return Err(Error::RankDeficient { rank: if max == 0.0 { 0 } else { rank }, cols });
        }
        Ok(Self { qr, r, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Least-squares coefficients for each column of `responses`.
    pub fn solve_many(&self, responses: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if responses.nrows() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "response has {} rows, design has {}",
                responses.nrows(),
                self.rows
            )));
        }
        let mut qty = responses.clone();
        self.qr.q_tr_mul(&mut qty);
        let top = qty.rows(0, self.cols).into_owned();
        self.r
            .solve_upper_triangular(&top)
            .ok_or(Error::RankDeficient { rank: 0, cols: self.cols })
    }

    pub fn solve(&self, response: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(response.len(), 1, response.as_slice());
        Ok(self.solve_many(&m)?.column(0).into_owned())
    }

    /// Diagonal of `(X'X)^{-1}`.
    pub fn inverse_gram_diagonal(&self) -> DVector<f64> {
        let eye = DMatrix::<f64>::identity(self.cols, self.cols);
        let r_inv = self
            .r
            .solve_upper_triangular(&eye)
            .expect("triangular factor checked for full rank");
        DVector::from_iterator(self.cols, (0..self.cols).map(|i| r_inv.row(i).norm_squared()))
    }

    /// Orthonormal rotation `Q' b` restricted to the column space.
    fn q_tr_top(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut qtb = b.clone();
        self.qr.q_tr_mul(&mut qtb);
        qtb.rows(0, self.cols).into_owned()
    }
}

/// Ordinary least squares.
pub fn ols(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<RegressionFit> {
    if design.nrows() != response.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, response has {}",
            design.nrows(),
            response.len()
        )));
    }
    let ls = LeastSquares::new(design.clone())?;
    let coefficients = ls.solve(response)?;
    let residuals = response - design * &coefficients;
    Ok(RegressionFit { coefficients, residuals, n_obs: response.len() })
}

/// Homoskedastic OLS standard errors for a fit produced from `design`.
pub fn ols_standard_errors(design: &DMatrix<f64>, fit: &RegressionFit) -> Result<DVector<f64>> {
    let ls = LeastSquares::new(design.clone())?;
    let dof = fit.n_obs.saturating_sub(ls.cols()).max(1) as f64;
    let s2 = fit.residuals.norm_squared() / dof;
    Ok(ls.inverse_gram_diagonal().map(|d| (s2 * d).sqrt()))
}

/// Weighted least squares; rows with zero weight are dropped.
///
/// Residuals are reported on the unweighted scale for every row.
pub fn wls(design: &DMatrix<f64>, response: &DVector<f64>, weights: &DVector<f64>) -> Result<RegressionFit> {
    let (rows, cols) = design.shape();
    if rows != response.len() || rows != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {rows} rows, response {}, weights {}",
            response.len(),
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|&w| w < 0.0 || w.is_nan()) {
        return Err(Error::NegativeWeight(i));
    }
    let keep: Vec<usize> = (0..rows).filter(|&i| weights[i] > 0.0).collect();
    if keep.is_empty() {
        return Err(Error::AllZeroWeights);
    }
    let mut scaled = DMatrix::zeros(keep.len(), cols);
    let mut y = DVector::zeros(keep.len());
    for (r, &i) in keep.iter().enumerate() {
        let sw = weights[i].sqrt();
        for j in 0..cols {
            scaled[(r, j)] = design[(i, j)] * sw;
        }
        y[r] = response[i] * sw;
    }
    let ls = LeastSquares::new(scaled)?;
    let coefficients = ls.solve(&y)?;
    let residuals = response - design * &coefficients;
    Ok(RegressionFit { coefficients, residuals, n_obs: rows })
}

/// Just-identified two-stage least squares, `(Z'X)^{-1} Z'y`.
///
/// Computed through the QR of the instruments: with `Z = QR`, the estimator
/// is `(Q'X)^{-1} Q'y`, which avoids forming cross products.
pub fn tsls(instruments: &DMatrix<f64>, regressors: &DMatrix<f64>, response: &DVector<f64>) -> Result<RegressionFit> {
    let (rows, k) = instruments.shape();
    if regressors.shape() != (rows, k) || response.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "instruments {:?}, regressors {:?}, response {}",
            instruments.shape(),
            regressors.shape(),
            response.len()
        )));
    }
    let ls = LeastSquares::new(instruments.clone()).map_err(|e| match e {
        Error::RankDeficient { .. } => Error::SingularCrossMoment,
        other => other,
    })?;
    let qx = ls.q_tr_top(regressors);
    let y = DMatrix::from_column_slice(rows, 1, response.as_slice());
    let qy = ls.q_tr_top(&y);
    let sv = qx.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 || sv.iter().any(|&s| s <= RANK_TOLERANCE * max) {
        return Err(Error::SingularCrossMoment);
    }
    let coefficients = qx
        .lu()
        .solve(&qy)
        .ok_or(Error::SingularCrossMoment)?
        .column(0)
        .into_owned();
    let residuals = response - regressors * &coefficients;
    Ok(RegressionFit { coefficients, residuals, n_obs: rows })
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("matrix is {:?}, expected square", m.shape())));
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

/// Lower Cholesky factor with positive diagonal.
pub fn cholesky_lower(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(sigma)?;
    let chol = nalgebra::Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    if l.diagonal().iter().any(|&d| !(d > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(l)
}

/// Column-stacking `vec`.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Half-vectorization: the lower triangle, column by column.
pub fn vech(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            out.push(a[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Duplication, elimination and commutation matrices of order `n`.
#[derive(Debug, Clone)]
pub struct MatrixCalculusOperators {
    pub n: usize,
    /// `D_n`, `n² × n(n+1)/2`: `D vech(A) = vec(A)` for symmetric `A`.
    pub duplication: DMatrix<f64>,
    /// `L_n`, `n(n+1)/2 × n²`: `L vec(A) = vech(A)`.
    pub elimination: DMatrix<f64>,
    /// `K_nn`, `n² × n²`: `K vec(A) = vec(A')`.
    pub commutation: DMatrix<f64>,
}

/// Position of `(i, j)`, `i >= j`, inside `vech`.
fn vech_index(n: usize, i: usize, j: usize) -> usize {
    j * n - j * (j + 1) / 2 + i
}

pub fn matrix_calculus_operators(n: usize) -> MatrixCalculusOperators {
    let m = n * (n + 1) / 2;
    let mut duplication = DMatrix::zeros(n * n, m);
    let mut elimination = DMatrix::zeros(m, n * n);
    let mut commutation = DMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in j..n {
            let k = vech_index(n, i, j);
            duplication[(i + j * n, k)] = 1.0;
            duplication[(j + i * n, k)] = 1.0;
            elimination[(k, i + j * n)] = 1.0;
        }
    }
    for p in 0..n {
        for q in 0..n {
            commutation[(p + q * n, q + p * n)] = 1.0;
        }
    }
    MatrixCalculusOperators { n, duplication, elimination, commutation }
}

/// Directional derivative of the lower Cholesky factor.
///
/// Returns `d chol(sigma + eps * d_sigma) / d eps` at `eps = 0`, from
/// `vech(dL) = (L_n (I + K_nn)(chol(sigma) ⊗ I_n) L_n')^{-1} vech(d_sigma)`.
/// The result is lower triangular, so it is re-embedded with `L_n'`.
pub fn cholesky_derivative(sigma: &DMatrix<f64>, d_sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if d_sigma.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "sigma is {n}x{n}, direction is {:?}",
            d_sigma.shape()
        )));
    }
    check_symmetric(d_sigma)?;
    let chol = cholesky_lower(sigma)?;
    let ops = matrix_calculus_operators(n);
    let eye_n = DMatrix::<f64>::identity(n, n);
    let eye_n2 = DMatrix::<f64>::identity(n * n, n * n);
    let operator = &ops.elimination
        * (eye_n2 + &ops.commutation)
        * chol.kronecker(&eye_n)
        * ops.elimination.transpose();
    let rhs = vech(d_sigma);
    let d_vech = operator.lu().solve(&rhs).ok_or(Error::SingularOperator)?;
    let d_vec = ops.elimination.transpose() * d_vech;
    Ok(DMatrix::from_column_slice(n, n, d_vec.as_slice()))
}

/// `X'r` scaled by the design's largest absolute entry; used to check the
/// normal equations.
pub fn normal_equation_residual(design: &DMatrix<f64>, residuals: &DVector<f64>) -> f64 {
    let scale = design.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let g = design.transpose() * residuals;
    g.amax() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = randn(rng, n, n);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn ols_identity_and_exact_fit() {
        let fit = ols(&DMatrix::identity(3, 3), &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(fit.coefficients, DVector::from_vec(vec![1.0, 2.0, 3.0]), epsilon = 1e-14);

        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let fit = ols(&x, &DVector::from_vec(vec![2.0, 4.0, 6.0])).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-14);
        assert!(fit.residuals.amax() < 1e-13);
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = randn(&mut rng, 50, 3);
        let beta = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let noise = randn(&mut rng, 50, 1).column(0).into_owned();
        let y = &x * &beta + noise * 0.1;
        let fit = ols(&x, &y).unwrap();
        let xtx = x.transpose() * &x;
        let oracle = xtx.try_inverse().unwrap() * x.transpose() * &y;
        assert_abs_diff_eq!(fit.coefficients, oracle, epsilon = 1e-10);
        assert!(normal_equation_residual(&x, &fit.residuals) < 1e-8);
    }

    #[test]
    fn ols_errors() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            ols(&x, &DVector::from_vec(vec![1.0, 2.0, 3.0])),
            Err(Error::RankDeficient { rank: 1, cols: 2 })
        ));
        assert!(matches!(
            ols(&x, &DVector::from_vec(vec![1.0, 2.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn wls_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = randn(&mut rng, 40, 2);
        let y = randn(&mut rng, 40, 1).column(0).into_owned();

        let unit = wls(&x, &y, &DVector::from_element(40, 1.0)).unwrap();
        assert_abs_diff_eq!(unit.coefficients, ols(&x, &y).unwrap().coefficients, epsilon = 1e-12);

        // indicator weights select a subsample
        let w = DVector::from_fn(40, |i, _| if i % 3 == 0 { 1.0 } else { 0.0 });
        let rows: Vec<usize> = (0..40).filter(|i| i % 3 == 0).collect();
        let xs = x.select_rows(rows.iter());
        let ys = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
        let sub = wls(&x, &y, &w).unwrap();
        assert_abs_diff_eq!(sub.coefficients, ols(&xs, &ys).unwrap().coefficients, epsilon = 1e-12);

        // random weights against explicit row scaling
        let w = DVector::from_fn(40, |_, _| rng.random::<f64>() * 3.0);
        let mut xs = x.clone();
        let mut ys = y.clone();
        for i in 0..40 {
            xs.row_mut(i).scale_mut(w[i].sqrt());
            ys[i] *= w[i].sqrt();
        }
        assert_abs_diff_eq!(
            wls(&x, &y, &w).unwrap().coefficients,
            ols(&xs, &ys).unwrap().coefficients,
            epsilon = 1e-12
        );

        assert_eq!(wls(&x, &y, &DVector::zeros(40)).unwrap_err(), Error::AllZeroWeights);
    }

    #[test]
    fn tsls_exogenous_and_two_stage() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(&mut rng, 60, 2);
        let y = randn(&mut rng, 60, 1).column(0).into_owned();
        assert_abs_diff_eq!(
            tsls(&x, &x, &y).unwrap().coefficients,
            ols(&x, &y).unwrap().coefficients,
            epsilon = 1e-12
        );

        let z = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let fit = tsls(&z, &z, &DVector::from_vec(vec![3.0, -6.0, 1.5])).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 3.0, epsilon = 1e-14);

        // endogenous regressor: x = z + u, y = 2x + u
        let n = 500;
        let z = randn(&mut rng, n, 1);
        let u = randn(&mut rng, n, 1);
        let xe = &z + &u;
        let y = (&xe * 2.0 + &u).column(0).into_owned();
        let iv = tsls(&z, &xe, &y).unwrap();
        // explicit stages: project x on z, then regress y on fitted x
        let first = ols(&z, &xe.column(0).into_owned()).unwrap();
        let fitted = &z * &first.coefficients;
        let second = ols(&DMatrix::from_column_slice(n, 1, fitted.as_slice()), &y).unwrap();
        assert_abs_diff_eq!(iv.coefficients, second.coefficients, epsilon = 1e-10);
        assert!(normal_equation_residual(&z, &iv.residuals) < 1e-8);
    }

    #[test]
    fn tsls_singular_cross_moment() {
        let z = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(tsls(&z, &x, &y).unwrap_err(), Error::SingularCrossMoment);
    }

    #[test]
    fn cholesky_examples() {
        assert_abs_diff_eq!(cholesky_lower(&DMatrix::identity(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let l = cholesky_lower(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert_abs_diff_eq!(l, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])), epsilon = 1e-15);
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let l = cholesky_lower(&s).unwrap();
        assert!((&l * l.transpose() - &s).amax() < 1e-12);
        assert_eq!(l[(0, 1)], 0.0);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(cholesky_lower(&bad).unwrap_err(), Error::NotPositiveDefinite);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(cholesky_lower(&asym), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn cholesky_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..100 {
            let n = 1 + i % 6;
            let s = random_spd(&mut rng, n);
            let l = cholesky_lower(&s).unwrap();
            assert!((&l * l.transpose() - &s).amax() < 1e-10);
        }
    }

    #[test]
    fn operators_small_orders() {
        let one = matrix_calculus_operators(1);
        for m in [&one.duplication, &one.elimination, &one.commutation] {
            assert_eq!(m, &DMatrix::<f64>::identity(1, 1));
        }
        let two = matrix_calculus_operators(2);
        // rows of D_2 pick (a11, a21, a21, a22) out of vech = (a11, a21, a22)
        let expected = DMatrix::from_row_slice(4, 3, &[1., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 1.]);
        assert_eq!(two.duplication, expected);
    }

    #[test]
    fn operator_identities_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ops = matrix_calculus_operators(3);
        for _ in 0..20 {
            let a = randn(&mut rng, 3, 3);
            let s = &a + a.transpose();
            assert_abs_diff_eq!(&ops.duplication * vech(&s), vec(&s), epsilon = 1e-15);
            assert_abs_diff_eq!(&ops.commutation * vec(&a), vec(&a.transpose()), epsilon = 1e-15);
            assert_abs_diff_eq!(&ops.elimination * vec(&a), vech(&a), epsilon = 1e-15);
        }
    }

    #[test]
    fn cholesky_derivative_scalar_and_zero() {
        let d = cholesky_derivative(&DMatrix::from_element(1, 1, 4.0), &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_abs_diff_eq!(d[(0, 0)], 0.25, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_spd(&mut rng, 3);
        let d = cholesky_derivative(&s, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(d.amax(), 0.0);
    }

    fn central_difference(s: &DMatrix<f64>, ds: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
        let up = cholesky_lower(&(s + ds * eps)).unwrap();
        let dn = cholesky_lower(&(s - ds * eps)).unwrap();
        (up - dn) / (2.0 * eps)
    }

    #[test]
    fn cholesky_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for i in 0..100 {
            let n = 1 + i % 4;
            let s = random_spd(&mut rng, n);
            let a = randn(&mut rng, n, n);
            let ds = (&a + a.transpose()) * 0.5;
            let analytic = cholesky_derivative(&s, &ds).unwrap();
            let numeric = central_difference(&s, &ds, 1e-6);
            assert!((&analytic - &numeric).amax() < 1e-6, "case {i}");
            // lower triangular
            for r in 0..n {
                for c in (r + 1)..n {
                    assert_eq!(analytic[(r, c)], 0.0);
                }
            }
        }
    }
}
