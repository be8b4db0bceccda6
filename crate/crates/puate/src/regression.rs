//! Parametric nuisance models: least squares for conditional means and
//! logistic regression (IRLS) for conditional probabilities.
//!
//! The intercept column is always added here, never by callers. Raw
//! covariates can be expanded with a polynomial [`FeatureMap`] first.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PuError, Result};
use crate::stats::{clip, sigmoid, softplus};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default probability clipping level for every prediction.
pub const DEFAULT_CLIP_EPS: f64 = 1e-3;
/// IRLS stops and reports separation once any coefficient exceeds this in magnitude.
pub const SEPARATION_CAP: f64 = 30.0;
const MAX_HALVINGS: usize = 30;
const SATURATION_TOL: f64 = 1e-6;

/// Feature expansion applied to raw covariates before the intercept is prepended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum FeatureMap {
    #[default]
    Identity,
    /// Powers up to `degree` (at most 3); with `interactions`, all monomials up to `degree`.
    Polynomial { degree: u8, interactions: bool },
}

impl FeatureMap {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeatureMap::Identity => Ok(()),
            FeatureMap::Polynomial { degree, .. } if (1..=3).contains(degree) => Ok(()),
            FeatureMap::Polynomial { degree, .. } => {
                invalid(format!("polynomial degree must be in 1..=3, got {degree}"))
            }
        }
    }

    /// Monomials as multisets of column indices, in output order.
    fn monomials(&self, p: usize) -> Vec<Vec<usize>> {
        match *self {
            FeatureMap::Identity => (0..p).map(|j| vec![j]).collect(),
            FeatureMap::Polynomial {
                degree,
                interactions: false,
            } => (1..=degree as usize)
                .flat_map(|k| (0..p).map(move |j| vec![j; k]))
                .collect(),
            FeatureMap::Polynomial {
                degree,
                interactions: true,
            } => (1..=degree as usize)
                .flat_map(|k| (0..p).combinations_with_replacement(k))
                .collect(),
        }
    }

    /// Number of expanded features for `p` raw covariates (intercept excluded).
    pub fn output_dim(&self, p: usize) -> usize {
        self.monomials(p).len()
    }

    /// Expands an n×p covariate matrix.
    pub fn expand(&self, x: &Matrix) -> Matrix {
        if *self == FeatureMap::Identity {
            return x.clone();
        }
        let mons = self.monomials(x.ncols());
        Matrix::from_fn(x.nrows(), mons.len(), |i, k| {
            mons[k].iter().map(|&j| x[(i, j)]).product()
        })
    }
}

/// Covariates with a leading intercept column.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    values: Matrix,
}

impl DesignMatrix {
    /// Wraps a full design whose first column must be all ones.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.ncols() == 0 {
            return invalid("design needs an intercept column");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("design contains non-finite entries");
        }
        if values.column(0).iter().any(|&v| v != 1.0) {
            return invalid("first design column must be all ones");
        }
        Ok(Self { values })
    }

    /// Prepends the intercept to raw n×p covariates.
    pub fn from_covariates(x: &Matrix) -> Result<Self> {
        let (n, p) = x.shape();
        let mut values = Matrix::from_element(n, p + 1, 1.0);
        values.view_mut((0, 1), (n, p)).copy_from(x);
        Self::new(values)
    }

    /// Applies `map` to raw covariates, then prepends the intercept.
    pub fn with_features(x: &Matrix, map: FeatureMap) -> Result<Self> {
        map.validate()?;
        Self::from_covariates(&map.expand(x))
    }

    pub fn intercept_only(n: usize) -> Self {
        Self {
            values: Matrix::from_element(n, 1, 1.0),
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Sub-design restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(rows),
        }
    }
}

/// Ordinary (optionally ridge) least-squares fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
}

/// How an IRLS fit terminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIter,
    /// A coefficient passed [`SEPARATION_CAP`]; probabilities are saturated.
    Separated,
    /// No step size up to the halving limit improved the objective.
    Stalled,
}

/// Logistic regression coefficients together with solver diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub status: FitStatus,
    pub iterations: usize,
}

impl LogisticModel {
    /// A model with fixed coefficients, e.g. for oracles or tests.
    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            status: FitStatus::Converged,
            iterations: 0,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn separated(&self) -> bool {
        self.status == FitStatus::Separated
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return invalid(format!("{what} contains non-finite values"));
    }
    Ok(())
}

/// Solves a symmetric positive-definite system, rejecting numerically singular ones.
fn solve_spd(a: Matrix, b: &Vector) -> Option<Vector> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if !(min_pivot > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    Some(chol.solve(b))
}

/// Minimizes ‖y − Xβ‖² + ridge·‖β₋₀‖², leaving the intercept unpenalized.
pub fn fit_ols(x: &DesignMatrix, y: &[f64], ridge: f64) -> Result<LinearModel> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return invalid(format!("y has length {} but design has {n} rows", y.len()));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return invalid(format!("ridge must be finite and non-negative, got {ridge}"));
    }
    check_finite(y, "y")?;
    if n < k && ridge == 0.0 {
        return Err(PuError::SingularDesign(format!(
            "{n} rows for {k} coefficients"
        )));
    }
    let xm = x.values();
    let mut gram = xm.tr_mul(xm);
    for j in 1..k {
        gram[(j, j)] += ridge;
    }
    let rhs = xm.tr_mul(&Vector::from_column_slice(y));
    let beta = solve_spd(gram, &rhs)
        .ok_or_else(|| PuError::SingularDesign("normal equations are not invertible".into()))?;
    Ok(LinearModel {
        coefficients: beta.iter().copied().collect(),
    })
}

fn log_likelihood(x: &Matrix, y: &Vector, beta: &Vector) -> f64 {
    let h = x * beta;
    h.iter().zip(y.iter()).map(|(h, y)| y * h - softplus(*h)).sum()
}

/// Logistic regression by iteratively reweighted least squares.
///
/// Newton steps are halved (up to 30 times) until the log-likelihood does not
/// decrease beyond rounding. Separation is reported through [`FitStatus::Separated`] with the
/// last iterate rather than as an error.
pub fn fit_logistic(
    x: &DesignMatrix,
    labels: &[bool],
    opts: &LogisticOptions,
) -> Result<LogisticModel> {
    let (n, k) = (x.nrows(), x.ncols());
    if labels.len() != n {
        return invalid(format!(
            "labels have length {} but design has {n} rows",
            labels.len()
        ));
    }
    if opts.max_iter == 0 || !(opts.tol > 0.0) {
        return invalid("logistic fit needs max_iter >= 1 and tol > 0");
    }
    if !labels.iter().any(|&l| l) {
        return Err(PuError::NoPositives("logistic fit has no label-1 samples".into()));
    }
    if labels.iter().all(|&l| l) {
        return Err(PuError::NoNegatives("logistic fit has no label-0 samples".into()));
    }
    let xm = x.values();
    let y = Vector::from_iterator(n, labels.iter().map(|&l| if l { 1.0 } else { 0.0 }));
    let mut beta = Vector::zeros(k);
    let mut ll = log_likelihood(xm, &y, &beta);
    let mut status = FitStatus::MaxIter;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        let p = (xm * &beta).map(sigmoid);
        let grad = xm.tr_mul(&(&y - &p));
        if grad.amax() <= opts.tol {
            status = FitStatus::Converged;
            break;
        }
        iterations = it + 1;
        let w = p.map(|p| (p * (1.0 - p)).max(1e-12));
        let mut xw = xm.clone();
        for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let mut hess = xm.tr_mul(&xw);
        let delta = match solve_spd(hess.clone(), &grad) {
            Some(d) => d,
            None => {
                let jitter = 1e-8 * hess.diagonal().amax().max(1e-12);
                for j in 0..k {
                    hess[(j, j)] += jitter;
                }
                match hess.cholesky() {
                    Some(c) => c.solve(&grad),
                    None => {
                        status = FitStatus::Stalled;
                        break;
                    }
                }
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        // Near the optimum the likelihood gain is below rounding of the sum.
        let slack = 1e-12 * (1.0 + ll.abs());
        for _ in 0..=MAX_HALVINGS {
            let cand = &beta + &delta * step;
            let cand_ll = log_likelihood(xm, &y, &cand);
            if cand_ll >= ll - slack {
                accepted = Some((cand, cand_ll));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((b, l)) => {
                beta = b;
                ll = l;
            }
            None => {
                status = FitStatus::Stalled;
                break;
            }
        }
        if beta.amax() > SEPARATION_CAP {
            status = FitStatus::Separated;
            break;
        }
    }
    let p = (xm * &beta).map(sigmoid);
    if status == FitStatus::MaxIter && xm.tr_mul(&(&y - &p)).amax() <= opts.tol {
        status = FitStatus::Converged;
    }
    // The gradient can fall below tol on separable data before the cap is hit;
    // a perfect fit is the same diagnosis.
    if (&y - &p).amax() < SATURATION_TOL {
        status = FitStatus::Separated;
    }
    Ok(LogisticModel {
        coefficients: beta.iter().copied().collect(),
        status,
        iterations,
    })
}

fn linear_scores(coefficients: &[f64], x: &DesignMatrix) -> Result<Vec<f64>> {
    if coefficients.len() != x.ncols() {
        return invalid(format!(
            "model has {} coefficients but design has {} columns",
            coefficients.len(),
            x.ncols()
        ));
    }
    let beta = Vector::from_column_slice(coefficients);
    Ok((x.values() * beta).iter().copied().collect())
}

/// Returns Xβ.
pub fn predict_mean(model: &LinearModel, x: &DesignMatrix) -> Result<Vec<f64>> {
    linear_scores(&model.coefficients, x)
}

/// Returns sigmoid(Xβ) clipped to `[clip_eps, 1 − clip_eps]`.
pub fn predict_proba(model: &LogisticModel, x: &DesignMatrix, clip_eps: f64) -> Result<Vec<f64>> {
    predict_proba_counted(model, x, clip_eps).map(|(p, _)| p)
}

/// As [`predict_proba`], also returning how many values were clipped.
pub fn predict_proba_counted(
    model: &LogisticModel,
    x: &DesignMatrix,
    clip_eps: f64,
) -> Result<(Vec<f64>, usize)> {
    check_clip_eps(clip_eps)?;
    let mut clipped = 0;
    let p = linear_scores(&model.coefficients, x)?
        .into_iter()
        .map(|h| {
            let (v, c) = clip(sigmoid(h), clip_eps, 1.0 - clip_eps);
            clipped += c as usize;
            v
        })
        .collect();
    Ok((p, clipped))
}

pub(crate) fn check_clip_eps(clip_eps: f64) -> Result<()> {
    if !(0.0..0.5).contains(&clip_eps) {
        return invalid(format!("clip_eps must be in [0, 0.5), got {clip_eps}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn design(rows: &[&[f64]]) -> DesignMatrix {
        let p = rows[0].len();
        DesignMatrix::from_covariates(&Matrix::from_fn(rows.len(), p, |i, j| rows[i][j])).unwrap()
    }

    /// Dense LU solve of the normal equations, independent of the Cholesky path.
    fn lu_oracle(x: &Matrix, y: &[f64]) -> Vec<f64> {
        let k = x.ncols();
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|r| {
                let mut row: Vec<f64> = (0..k)
                    .map(|c| (0..x.nrows()).map(|i| x[(i, r)] * x[(i, c)]).sum())
                    .collect();
                row.push((0..x.nrows()).map(|i| x[(i, r)] * y[i]).sum());
                row
            })
            .collect();
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&a1, &b1| a[a1][col].abs().total_cmp(&a[b1][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let (top, rest) = a.split_at_mut(col + 1);
            let pivot = &top[col];
            for row in rest {
                let f = row[col] / pivot[col];
                for (v, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *v -= f * p;
                }
            }
        }
        let mut beta = vec![0.0; k];
        for r in (0..k).rev() {
            let s: f64 = (r + 1..k).map(|c| a[r][c] * beta[c]).sum();
            beta[r] = (a[r][k] - s) / a[r][r];
        }
        beta
    }

    #[test]
    fn ols_interpolates_two_points() {
        let m = fit_ols(&design(&[&[0.0], &[1.0]]), &[1.0, 3.0], 0.0).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((m.coefficients[1] - 2.0).abs() < 1e-12);
        let at2 = predict_mean(&m, &design(&[&[2.0]])).unwrap();
        assert!((at2[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ols_intercept_only_is_mean() {
        let m = fit_ols(&DesignMatrix::intercept_only(7), &[5.0; 7], 0.0).unwrap();
        assert!((m.coefficients[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ols_matches_lu_oracle_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raw = Matrix::from_fn(50, 3, |_, _| rng.sample(StandardNormal));
        let x = DesignMatrix::from_covariates(&raw).unwrap();
        let y: Vec<f64> = (0..50)
            .map(|i| 0.5 + raw[(i, 0)] - 2.0 * raw[(i, 2)] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = fit_ols(&x, &y, 0.0).unwrap();
        let oracle = lu_oracle(x.values(), &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
        let pred = predict_mean(&fit, &x).unwrap();
        let resid = Vector::from_iterator(50, y.iter().zip(&pred).map(|(a, b)| a - b));
        let ortho = x.values().tr_mul(&resid);
        let scale = x.values().tr_mul(&Vector::from_column_slice(&y)).amax();
        assert!(ortho.amax() <= 1e-8 * scale);
    }

    #[test]
    fn ols_predict_matches_direct_product() {
        let m = LinearModel {
            coefficients: vec![0.5, -1.0, 2.0],
        };
        let x = design(&[&[1.0, 2.0], &[-3.0, 0.25]]);
        let p = predict_mean(&m, &x).unwrap();
        assert_eq!(p, vec![0.5 - 1.0 + 4.0, 0.5 + 3.0 + 0.5]);
    }

    #[test]
    fn ols_identity_design_echoes_coefficients() {
        let m = LinearModel {
            coefficients: vec![1.5, -2.0],
        };
        let x = DesignMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])).unwrap();
        assert_eq!(predict_mean(&m, &x).unwrap(), vec![1.5, -0.5]);
    }

    #[test]
    fn ols_errors() {
        let x = design(&[&[1.0], &[1.0], &[1.0]]);
        assert!(matches!(
            fit_ols(&x, &[1.0, 2.0, 3.0], 0.0),
            Err(PuError::SingularDesign(_))
        ));
        assert!(fit_ols(&x, &[1.0, 2.0, 3.0], 0.1).is_ok());
        assert!(matches!(
            fit_ols(&x, &[1.0, f64::NAN, 3.0], 0.0),
            Err(PuError::InvalidInput(_))
        ));
        assert!(matches!(
            fit_ols(&x, &[1.0], 0.0),
            Err(PuError::InvalidInput(_))
        ));
        let m = LinearModel {
            coefficients: vec![1.0],
        };
        assert!(matches!(predict_mean(&m, &x), Err(PuError::InvalidInput(_))));
    }

    #[test]
    fn ridge_leaves_intercept_unpenalized() {
        let x = design(&[&[-1.0], &[1.0], &[-1.0], &[1.0]]);
        let m = fit_ols(&x, &[2.0, 4.0, 2.0, 4.0], 1e6).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-9);
        assert!(m.coefficients[1].abs() < 1e-4);
    }

    #[test]
    fn design_rejects_bad_input() {
        assert!(DesignMatrix::new(Matrix::from_row_slice(1, 2, &[2.0, 0.0])).is_err());
        assert!(DesignMatrix::from_covariates(&Matrix::from_row_slice(1, 1, &[f64::INFINITY])).is_err());
    }

    #[test]
    fn logistic_two_point_symmetric() {
        let x = DesignMatrix::intercept_only(2);
        let m = fit_logistic(&x, &[false, true], &LogisticOptions::default()).unwrap();
        assert!(m.converged());
        assert!(m.coefficients[0].abs() < 1e-12);
        assert_eq!(predict_proba(&m, &x, 0.0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn logistic_independent_balanced_labels_zero_slope() {
        let x = design(&[&[-1.0], &[-1.0], &[1.0], &[1.0]]);
        let m = fit_logistic(&x, &[false, true, false, true], &LogisticOptions::default()).unwrap();
        assert!(m.converged());
        assert!(m.coefficients[1].abs() < 1e-8);
    }

    /// Plain gradient ascent on the mean log-likelihood, run to a 1e-10 gradient norm.
    fn gradient_oracle(x: &Matrix, y: &[f64]) -> Vec<f64> {
        let n = x.nrows() as f64;
        let mut b = vec![0.0; x.ncols()];
        for _ in 0..2_000_000 {
            let mut g = vec![0.0; b.len()];
            for i in 0..x.nrows() {
                let h: f64 = (0..b.len()).map(|j| x[(i, j)] * b[j]).sum();
                let r = y[i] - 1.0 / (1.0 + (-h).exp());
                for j in 0..b.len() {
                    g[j] += x[(i, j)] * r / n;
                }
            }
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10 {
                break;
            }
            for j in 0..b.len() {
                b[j] += 2.0 * g[j];
            }
        }
        b
    }

    #[test]
    fn logistic_matches_first_order_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = Matrix::from_fn(200, 1, |_, _| rng.sample(StandardNormal));
        let labels: Vec<bool> = (0..200)
            .map(|i| rng.random::<f64>() < sigmoid(0.3 - 0.7 * raw[(i, 0)]))
            .collect();
        let x = DesignMatrix::from_covariates(&raw).unwrap();
        let fit = fit_logistic(&x, &labels, &LogisticOptions::default()).unwrap();
        assert!(fit.converged());
        let y: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        let oracle = gradient_oracle(x.values(), &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
        // Score equation at the fixed point.
        let p = predict_proba(&fit, &x, 0.0).unwrap();
        let score: f64 = y.iter().zip(&p).map(|(a, b)| a - b).sum();
        assert!(score.abs() <= 1e-8);
    }

    #[test]
    fn logistic_separation_is_reported() {
        let x = design(&[&[-2.0], &[-1.0], &[1.0], &[2.0]]);
        let m = fit_logistic(&x, &[false, false, true, true], &LogisticOptions::default()).unwrap();
        assert!(m.separated());
        assert!(!m.converged());
    }

    #[test]
    fn logistic_needs_both_classes() {
        let x = DesignMatrix::intercept_only(3);
        let o = LogisticOptions::default();
        assert!(matches!(fit_logistic(&x, &[true; 3], &o), Err(PuError::NoNegatives(_))));
        assert!(matches!(fit_logistic(&x, &[false; 3], &o), Err(PuError::NoPositives(_))));
    }

    #[test]
    fn proba_clipping() {
        let zero = LogisticModel::from_coefficients(vec![0.0, 0.0]);
        let x = design(&[&[3.0], &[-3.0]]);
        assert_eq!(predict_proba(&zero, &x, 1e-3).unwrap(), vec![0.5, 0.5]);
        let big = LogisticModel::from_coefficients(vec![50.0, 0.0]);
        let (p, c) = predict_proba_counted(&big, &x, 0.01).unwrap();
        assert_eq!(p, vec![0.99, 0.99]);
        assert_eq!(c, 2);
        let m = LogisticModel::from_coefficients(vec![0.2, -0.4]);
        let p = predict_proba(&m, &x, 0.0).unwrap();
        assert!((p[0] - 1.0 / (1.0 + (-(0.2 - 1.2f64)).exp())).abs() < 1e-15);
        assert!(predict_proba(&m, &x, 0.5).is_err());
    }

    #[test]
    fn polynomial_features() {
        let x = Matrix::from_row_slice(1, 2, &[2.0, 3.0]);
        let plain = FeatureMap::Polynomial { degree: 3, interactions: false }.expand(&x);
        assert_eq!(plain.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0, 9.0, 8.0, 27.0]);
        let inter = FeatureMap::Polynomial { degree: 2, interactions: true }.expand(&x);
        assert_eq!(inter.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(FeatureMap::Polynomial { degree: 2, interactions: true }.output_dim(10), 65);
        assert!(FeatureMap::Polynomial { degree: 4, interactions: false }.validate().is_err());
    }
}
