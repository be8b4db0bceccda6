//! PU-specific nuisances: observation probability π, labeling constant c,
//! censoring propensity g, case-control propensity e (unbiased PU risk) and
//! the density ratio r.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PuError, Result};
use crate::regression::{
    check_clip_eps, fit_logistic, predict_proba, predict_proba_counted, DesignMatrix, FeatureMap,
    FitStatus, LogisticModel, LogisticOptions, Matrix, Vector, SEPARATION_CAP,
};
use crate::stats::{clip, sigmoid, softplus};

/// Logistic model for ℙ(O = 1 | X).
pub fn fit_observation_model(x: &DesignMatrix, o: &[bool]) -> Result<LogisticModel> {
    fit_logistic(x, o, &LogisticOptions::default())
}

/// Elkan–Noto labeling constant: mean of π̂(1|x) over labeled samples, clipped to `[clip_eps, 1]`.
pub fn estimate_labeling_constant(
    pi_hat: &LogisticModel,
    x: &DesignMatrix,
    o: &[bool],
    clip_eps: f64,
) -> Result<f64> {
    if o.len() != x.nrows() {
        return invalid("labels and design differ in length");
    }
    let labeled: Vec<usize> = (0..o.len()).filter(|&i| o[i]).collect();
    if labeled.is_empty() {
        return Err(PuError::NoPositives("labeling constant needs O=1 samples".into()));
    }
    let p = predict_proba(pi_hat, &x.select_rows(&labeled), clip_eps)?;
    let c = p.iter().sum::<f64>() / p.len() as f64;
    Ok(c.clamp(clip_eps, 1.0))
}

/// Converts π̂(1|x) and ĉ into (g(1|x), g(0|x)) and reports whether the output was clipped.
///
/// π̂(0|x) is floored at `clip_eps` before dividing.
pub fn g_from_observation(pi1: f64, c_hat: f64, clip_eps: f64) -> (f64, f64, bool) {
    let pi0 = (1.0 - pi1).max(clip_eps);
    let raw = (1.0 - c_hat) * pi1 / (c_hat * pi0);
    let (g1, clipped) = clip(raw, clip_eps, 1.0 - clip_eps);
    (g1, 1.0 - g1, clipped)
}

/// Elkan–Noto estimate of the censoring propensity g(d|x) = ℙ(D = d | X = x, O = 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensoringPropensity {
    pub pi_model: LogisticModel,
    pub c_hat: f64,
    pub clip_eps: f64,
    /// Feature map the observation model was fitted with.
    pub features: FeatureMap,
}

impl CensoringPropensity {
    pub fn new(
        pi_model: LogisticModel,
        c_hat: f64,
        clip_eps: f64,
        features: FeatureMap,
    ) -> Result<Self> {
        check_clip_eps(clip_eps)?;
        if !(c_hat > 0.0 && c_hat <= 1.0) {
            return invalid(format!("c_hat must be in (0, 1], got {c_hat}"));
        }
        Ok(Self {
            pi_model,
            c_hat,
            clip_eps,
            features,
        })
    }

    /// g(1|x) for every row of raw covariates, with the number of clipped values.
    pub fn g1_values(&self, x: &Matrix) -> Result<(Vec<f64>, usize)> {
        let design = DesignMatrix::with_features(x, self.features)?;
        let (pi1, mut clips) = predict_proba_counted(&self.pi_model, &design, self.clip_eps)?;
        let g1 = pi1
            .into_iter()
            .map(|p| {
                let (g1, _, c) = g_from_observation(p, self.c_hat, self.clip_eps);
                clips += c as usize;
                g1
            })
            .collect();
        Ok((g1, clips))
    }
}

/// (g(1|x), g(0|x)) at a single raw covariate vector.
pub fn censoring_propensity_at(cp: &CensoringPropensity, x: &[f64]) -> Result<(f64, f64)> {
    let (g1, _) = cp.g1_values(&Matrix::from_row_slice(1, x.len(), x))?;
    Ok((g1[0], 1.0 - g1[0]))
}

/// Full Elkan–Noto pipeline on raw covariates: fit π̂, estimate ĉ.
pub fn fit_censoring_propensity(
    x: &Matrix,
    o: &[bool],
    features: FeatureMap,
    clip_eps: f64,
) -> Result<CensoringPropensity> {
    check_clip_eps(clip_eps)?;
    let design = DesignMatrix::with_features(x, features)?;
    let pi = fit_observation_model(&design, o)?;
    let c_hat = estimate_labeling_constant(&pi, &design, o, clip_eps)?;
    CensoringPropensity::new(pi, c_hat, clip_eps, features)
}

/// Elkan–Noto pipeline on an auxiliary sample without outcomes; the result is
/// shared by every fold.
pub fn fit_censoring_propensity_from_aux(
    aux_x: &Matrix,
    aux_o: &[bool],
    features: FeatureMap,
    clip_eps: f64,
) -> Result<CensoringPropensity> {
    if aux_x.nrows() == 0 {
        return Err(PuError::NoData("auxiliary sample is empty".into()));
    }
    if aux_o.len() != aux_x.nrows() {
        return invalid("auxiliary labels and covariates differ in length");
    }
    fit_censoring_propensity(aux_x, aux_o, features, clip_eps)
}

/// Options for the backtracking descent on the unbiased PU risk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub clip_eps: f64,
}

impl Default for PuOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            initial_step: 1.0,
            shrink: 0.5,
            clip_eps: crate::regression::DEFAULT_CLIP_EPS,
        }
    }
}

/// Case-control propensity e(1|x) = ℙ(D = 1 | X = x) under the unlabeled law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseControlPropensity {
    pub score_model: LogisticModel,
    pub class_prior: f64,
    pub clip_eps: f64,
    pub features: FeatureMap,
}

impl CaseControlPropensity {
    pub fn new(
        score_model: LogisticModel,
        class_prior: f64,
        clip_eps: f64,
        features: FeatureMap,
    ) -> Result<Self> {
        check_clip_eps(clip_eps)?;
        check_prior(class_prior)?;
        Ok(Self {
            score_model,
            class_prior,
            clip_eps,
            features,
        })
    }

    /// ê(1|x) for each row, clipped to `[clip_eps, 1 − clip_eps]`, with clip count.
    pub fn e1_values(&self, x: &Matrix) -> Result<(Vec<f64>, usize)> {
        let design = DesignMatrix::with_features(x, self.features)?;
        predict_proba_counted(&self.score_model, &design, self.clip_eps)
    }

    pub fn e1_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.e1_values(&Matrix::from_row_slice(1, x.len(), x))?.0[0])
    }
}

fn check_prior(class_prior: f64) -> Result<()> {
    if !(class_prior > 0.0 && class_prior <= 1.0) {
        return invalid(format!("class prior must be in (0, 1], got {class_prior}"));
    }
    Ok(())
}

/// r = prior / e1, capped at 1/clip_eps; returns the value and whether it was capped.
pub fn density_ratio(e1: f64, class_prior: f64, clip_eps: f64) -> (f64, bool) {
    let r = class_prior / e1;
    if clip_eps > 0.0 && r > 1.0 / clip_eps {
        (1.0 / clip_eps, true)
    } else {
        (r, false)
    }
}

/// r̂(x) = e(1) / ê(1|x), the ratio of the population to the treated covariate density.
pub fn density_ratio_at(cp: &CaseControlPropensity, x: &[f64]) -> Result<f64> {
    let e1 = cp.e1_at(x)?;
    Ok(density_ratio(e1, cp.class_prior, cp.clip_eps).0)
}

/// Unbiased PU risk with logistic loss for linear scores h = Xβ.
pub fn unbiased_pu_risk(
    beta: &[f64],
    x_pos: &DesignMatrix,
    x_unl: &DesignMatrix,
    class_prior: f64,
) -> f64 {
    let b = Vector::from_column_slice(beta);
    let hp = x_pos.values() * &b;
    let hu = x_unl.values() * &b;
    let m = hp.len() as f64;
    let l = hu.len() as f64;
    let pos: f64 = hp.iter().map(|h| softplus(-h) - softplus(*h)).sum::<f64>() / m;
    let unl: f64 = hu.iter().map(|h| softplus(*h)).sum::<f64>() / l;
    class_prior * pos + unl
}

fn pu_gradient(beta: &Vector, x_pos: &DesignMatrix, x_unl: &DesignMatrix, prior: f64) -> Vector {
    let m = x_pos.nrows() as f64;
    let l = x_unl.nrows() as f64;
    let pos_mean = x_pos.values().row_sum().transpose() / m;
    let su = (x_unl.values() * beta).map(sigmoid);
    x_unl.values().tr_mul(&su) / l - pos_mean * prior
}

/// Minimizes the unbiased PU risk over linear scores by full-batch gradient
/// descent with Armijo backtracking.
///
/// Non-convergence is not an error: the last (best) iterate is returned with a
/// non-`Converged` status.
pub fn fit_unbiased_pu(
    x_pos: &Matrix,
    x_unl: &Matrix,
    class_prior: f64,
    features: FeatureMap,
    opts: &PuOptions,
) -> Result<CaseControlPropensity> {
    check_prior(class_prior)?;
    check_clip_eps(opts.clip_eps)?;
    if x_pos.nrows() == 0 {
        return Err(PuError::NoPositives("treated sample is empty".into()));
    }
    if x_unl.nrows() == 0 {
        return Err(PuError::NoData("unlabeled sample is empty".into()));
    }
    if x_pos.ncols() != x_unl.ncols() {
        return invalid("treated and unlabeled covariates differ in dimension");
    }
    if opts.max_iter == 0 || !(opts.grad_tol > 0.0) || !(opts.shrink > 0.0 && opts.shrink < 1.0)
    {
        return invalid("invalid PU optimizer options");
    }
    let dp = DesignMatrix::with_features(x_pos, features)?;
    let du = DesignMatrix::with_features(x_unl, features)?;
    let mut beta = Vector::zeros(dp.ncols());
    let mut risk = unbiased_pu_risk(beta.as_slice(), &dp, &du, class_prior);
    let mut status = FitStatus::MaxIter;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        let grad = pu_gradient(&beta, &dp, &du, class_prior);
        if grad.amax() <= opts.grad_tol {
            status = FitStatus::Converged;
            break;
        }
        iterations = it + 1;
        let g2 = grad.norm_squared();
        let mut step = opts.initial_step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &beta - &grad * step;
            let r = unbiased_pu_risk(cand.as_slice(), &dp, &du, class_prior);
            if r <= risk - 1e-4 * step * g2 {
                accepted = Some((cand, r));
                break;
            }
            step *= opts.shrink;
        }
        match accepted {
            Some((b, r)) => {
                beta = b;
                risk = r;
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
    if status == FitStatus::MaxIter
        && pu_gradient(&beta, &dp, &du, class_prior).amax() <= opts.grad_tol
    {
        status = FitStatus::Converged;
    }
    let model = LogisticModel {
        coefficients: beta.iter().copied().collect(),
        status,
        iterations,
    };
    CaseControlPropensity::new(model, class_prior, opts.clip_eps, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn column(v: &[f64]) -> Matrix {
        Matrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn g_hand_values() {
        let (g1, g0, _) = g_from_observation(0.3, 0.6, 1e-3);
        assert!((g1 - 0.4 * 0.3 / (0.6 * 0.7)).abs() < 1e-15);
        assert!((g1 - 0.285_714_285_714_285_7).abs() < 1e-12);
        assert_eq!(g1 + g0, 1.0);
        // (1 − 0.5)·0.5 / (0.5·0.5) = 1, so the upper clip applies.
        let (g1, _, clipped) = g_from_observation(0.5, 0.5, 1e-3);
        assert_eq!(g1, 1.0 - 1e-3);
        assert!(clipped);
        let (g1, _, clipped) = g_from_observation(0.4, 1.0, 1e-3);
        assert_eq!(g1, 1e-3);
        assert!(clipped);
    }

    #[test]
    fn labeling_constant_of_constant_model() {
        let x = DesignMatrix::intercept_only(4);
        let logit = (0.3f64 / 0.7).ln();
        let m = LogisticModel::from_coefficients(vec![logit]);
        let c = estimate_labeling_constant(&m, &x, &[true, false, true, false], 1e-3).unwrap();
        assert!((c - 0.3).abs() < 1e-12);
        let single = LogisticModel::from_coefficients(vec![(0.8f64 / 0.2).ln()]);
        let c = estimate_labeling_constant(&single, &DesignMatrix::intercept_only(1), &[true], 1e-3)
            .unwrap();
        assert!((c - 0.8).abs() < 1e-12);
        assert!(matches!(
            estimate_labeling_constant(&m, &x, &[false; 4], 1e-3),
            Err(PuError::NoPositives(_))
        ));
    }

    #[test]
    fn observation_model_separation_and_constant() {
        let x = DesignMatrix::from_covariates(&column(&[-2.0, -1.0, 1.0, 2.0])).unwrap();
        let m = fit_observation_model(&x, &[false, false, true, true]).unwrap();
        assert!(m.separated());
        // Labels independent of a symmetric covariate, rate 0.4.
        let xs: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let o: Vec<bool> = (0..10).map(|i| (i / 2) % 5 < 2).collect();
        let d = DesignMatrix::from_covariates(&column(&xs)).unwrap();
        let m = fit_observation_model(&d, &o).unwrap();
        for p in predict_proba(&m, &d, 1e-3).unwrap() {
            assert!((p - 0.4).abs() < 1e-8);
        }
    }

    #[test]
    fn aux_fit_errors() {
        let empty = Matrix::zeros(0, 2);
        assert!(matches!(
            fit_censoring_propensity_from_aux(&empty, &[], FeatureMap::Identity, 1e-3),
            Err(PuError::NoData(_))
        ));
        let x = column(&[0.0, 1.0, 2.0]);
        assert!(matches!(
            fit_censoring_propensity_from_aux(&x, &[true; 3], FeatureMap::Identity, 1e-3),
            Err(PuError::NoNegatives(_))
        ));
    }

    #[test]
    fn propensity_pair_sums_to_one() {
        let cp = CensoringPropensity::new(
            LogisticModel::from_coefficients(vec![-0.5, 1.0]),
            0.6,
            1e-3,
            FeatureMap::Identity,
        )
        .unwrap();
        for x in [-3.0, -0.2, 0.0, 1.4, 5.0] {
            let (g1, g0) = censoring_propensity_at(&cp, &[x]).unwrap();
            assert_eq!(g1 + g0, 1.0);
            assert!(g1 >= 1e-3 && g0 >= 1e-3);
        }
    }

    #[test]
    fn density_ratio_hand_values() {
        assert_eq!(density_ratio(0.6, 0.3, 1e-3).0, 0.5);
        assert_eq!(density_ratio(0.3, 0.3, 1e-3).0, 1.0);
        assert_eq!(density_ratio(1e-6, 0.3, 1e-3), (1000.0, true));
        let cp = CaseControlPropensity::new(
            LogisticModel::from_coefficients(vec![(0.6f64 / 0.4).ln()]),
            0.3,
            1e-3,
            FeatureMap::Identity,
        )
        .unwrap();
        assert!((density_ratio_at(&cp, &[]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unbiased_pu_prior_one_saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Matrix::from_fn(100, 2, |_, _| rng.sample(StandardNormal));
        let cp = fit_unbiased_pu(&x, &x, 1.0, FeatureMap::Identity, &PuOptions::default()).unwrap();
        let (e1, _) = cp.e1_values(&x).unwrap();
        assert!(e1.iter().all(|&e| e > 0.99));
        assert!(matches!(
            cp.score_model.status,
            FitStatus::Separated | FitStatus::MaxIter
        ));
    }

    #[test]
    fn unbiased_pu_indistinguishable_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let half: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let sym: Vec<f64> = half.iter().chain(half.iter().map(|v| -v).collect::<Vec<_>>().iter()).copied().collect();
        let x = column(&sym);
        let cp = fit_unbiased_pu(&x, &x, 0.5, FeatureMap::Identity, &PuOptions::default()).unwrap();
        assert!(cp.score_model.converged());
        for e in cp.e1_values(&x).unwrap().0 {
            assert!((e - 0.5).abs() < 1e-5);
        }
    }

    #[test]
    fn unbiased_pu_risk_decreases_from_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xp = Matrix::from_fn(300, 2, |_, _| 0.5 + rng.sample::<f64, _>(StandardNormal));
        let xu = Matrix::from_fn(600, 2, |i, _| {
            (if i % 3 == 0 { 0.5 } else { 0.0 }) + rng.sample::<f64, _>(StandardNormal)
        });
        let cp = fit_unbiased_pu(&xp, &xu, 1.0 / 3.0, FeatureMap::Identity, &PuOptions::default())
            .unwrap();
        let dp = DesignMatrix::from_covariates(&xp).unwrap();
        let du = DesignMatrix::from_covariates(&xu).unwrap();
        let fitted = unbiased_pu_risk(&cp.score_model.coefficients, &dp, &du, 1.0 / 3.0);
        assert!(fitted < unbiased_pu_risk(&[0.0; 3], &dp, &du, 1.0 / 3.0));
    }
}
