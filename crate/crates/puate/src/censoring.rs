//! ATE estimators for the censoring design: one i.i.d. sample in which a
//! random subset of treated units is labeled (O = 1) and every other unit is
//! an unlabeled mixture of treated and controls.

use serde::{Deserialize, Serialize};

use crate::dgp::CensoringTruth;
use crate::error::{invalid, Result};
use crate::regression::{check_clip_eps, Matrix};
use crate::report::{check_level, EstimateReport, Method};
use crate::stats::clip;

/// Observed censoring sample {(Xᵢ, Oᵢ, Yᵢ)}.
#[derive(Clone, Debug, PartialEq)]
pub struct CensoringDataset {
    /// Raw covariates, n×p.
    pub x: Matrix,
    pub o: Vec<bool>,
    pub y: Vec<f64>,
}

impl CensoringDataset {
    pub fn new(x: Matrix, o: Vec<bool>, y: Vec<f64>) -> Result<Self> {
        let n = x.nrows();
        if o.len() != n || y.len() != n {
            return invalid(format!(
                "censoring data lengths differ: x {n}, o {}, y {}",
                o.len(),
                y.len()
            ));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return invalid("censoring data contains non-finite values");
        }
        Ok(Self { x, o, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

/// Nuisance values evaluated at every sample, each from the model that did not see it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensNuisanceTable {
    pub mu_t: Vec<f64>,
    pub nu: Vec<f64>,
    /// π(1|Xᵢ), clipped.
    pub pi1: Vec<f64>,
    /// g(1|Xᵢ), clipped.
    pub g1: Vec<f64>,
    pub clip_count: usize,
    /// All four nuisances are the true functions.
    pub known: bool,
}

impl CensNuisanceTable {
    /// Evaluates the true nuisance functions, clipping π and g to `[clip_eps, 1 − clip_eps]`.
    pub fn from_truth(
        data: &CensoringDataset,
        truth: &dyn CensoringTruth,
        clip_eps: f64,
    ) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..data.len()).map(|i| data.row(i)).collect();
        Self::from_values(
            rows.iter().map(|x| truth.mu_t(x)).collect(),
            rows.iter().map(|x| truth.nu(x)).collect(),
            rows.iter().map(|x| truth.pi1(x)).collect(),
            rows.iter().map(|x| truth.g1(x)).collect(),
            clip_eps,
        )
    }

    /// Builds a table of known nuisance values, clipping π and g.
    pub fn from_values(
        mu_t: Vec<f64>,
        nu: Vec<f64>,
        pi1: Vec<f64>,
        g1: Vec<f64>,
        clip_eps: f64,
    ) -> Result<Self> {
        check_clip_eps(clip_eps)?;
        let mut clip_count = 0;
        let mut clip_all = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .map(|p| {
                    let (p, c) = clip(p, clip_eps, 1.0 - clip_eps);
                    clip_count += c as usize;
                    p
                })
                .collect()
        };
        let pi1 = clip_all(pi1);
        let g1 = clip_all(g1);
        Ok(Self {
            mu_t,
            nu,
            pi1,
            g1,
            clip_count,
            known: true,
        })
    }

    fn check(&self, n: usize) -> Result<()> {
        if [self.mu_t.len(), self.nu.len(), self.pi1.len(), self.g1.len()]
            .iter()
            .any(|&l| l != n)
        {
            return invalid("nuisance table does not cover every sample");
        }
        Ok(())
    }
}

/// Efficient influence function of the censoring design evaluated at one sample.
///
/// `pi1` and `g1` are expected to be clipped already.
pub fn influence_censoring(o: bool, y: f64, mu_t: f64, nu: f64, pi1: f64, g1: f64) -> f64 {
    let pi0 = 1.0 - pi1;
    let g0 = 1.0 - g1;
    let plug_in = mu_t - nu / g0 + g1 / g0 * mu_t;
    if o {
        let r = y - mu_t;
        r / pi1 + g1 * r / (g0 * pi1) + plug_in
    } else {
        -(y - nu) / (g0 * pi0) + plug_in
    }
}

/// Per-sample IPW summand.
pub fn ipw_summand_censoring(o: bool, y: f64, pi1: f64, g1: f64) -> f64 {
    let g0 = 1.0 - g1;
    if o {
        y / pi1 + g1 * y / (g0 * pi1)
    } else {
        -y / (g0 * (1.0 - pi1))
    }
}

/// Per-sample direct-method (plug-in) value.
pub fn dm_summand_censoring(mu_t: f64, nu: f64, g1: f64) -> f64 {
    let g0 = 1.0 - g1;
    mu_t - nu / g0 + g1 / g0 * mu_t
}

/// τ̂ = mean of the efficient influence values; variance is their sample variance.
pub fn estimate_censoring_efficient(
    data: &CensoringDataset,
    nuis: &CensNuisanceTable,
    level: f64,
) -> Result<EstimateReport> {
    check_level(level)?;
    nuis.check(data.len())?;
    let s = (0..data.len())
        .map(|i| {
            influence_censoring(
                data.o[i],
                data.y[i],
                nuis.mu_t[i],
                nuis.nu[i],
                nuis.pi1[i],
                nuis.g1[i],
            )
        })
        .collect();
    EstimateReport::from_summands(Method::Efficient, s, level, nuis.clip_count, false)
}

/// Inverse-probability-weighting estimator; the interval is flagged naive
/// unless every nuisance is known.
pub fn estimate_censoring_ipw(
    data: &CensoringDataset,
    nuis: &CensNuisanceTable,
    level: f64,
) -> Result<EstimateReport> {
    check_level(level)?;
    nuis.check(data.len())?;
    let s = (0..data.len())
        .map(|i| ipw_summand_censoring(data.o[i], data.y[i], nuis.pi1[i], nuis.g1[i]))
        .collect();
    EstimateReport::from_summands(Method::Ipw, s, level, nuis.clip_count, !nuis.known)
}

/// Direct-method estimator with a naive interval.
pub fn estimate_censoring_dm(
    data: &CensoringDataset,
    nuis: &CensNuisanceTable,
    level: f64,
) -> Result<EstimateReport> {
    check_level(level)?;
    nuis.check(data.len())?;
    let s = (0..data.len())
        .map(|i| dm_summand_censoring(nuis.mu_t[i], nuis.nu[i], nuis.g1[i]))
        .collect();
    EstimateReport::from_summands(Method::Dm, s, level, nuis.clip_count, true)
}

pub fn estimate_censoring(
    method: Method,
    data: &CensoringDataset,
    nuis: &CensNuisanceTable,
    level: f64,
) -> Result<EstimateReport> {
    match method {
        Method::Efficient => estimate_censoring_efficient(data, nuis, level),
        Method::Ipw => estimate_censoring_ipw(data, nuis, level),
        Method::Dm => estimate_censoring_dm(data, nuis, level),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn influence_hand_values() {
        // Zero-residual labeled sample with g1 = 0.
        assert_eq!(influence_censoring(true, 2.0, 2.0, 1.0, 0.5, 0.0), 1.0);
        let s = influence_censoring(true, 2.0, 1.0, 0.5, 0.5, 0.2);
        assert!((s - 3.125).abs() < 1e-12);
        let (mu_t, nu, g1) = (1.7, 0.9, 0.35);
        let s = influence_censoring(false, nu, mu_t, nu, 0.4, g1);
        assert_eq!(s, mu_t - nu / (1.0 - g1) + g1 / (1.0 - g1) * mu_t);
    }

    fn toy() -> CensoringDataset {
        CensoringDataset::new(
            Matrix::zeros(4, 1),
            vec![true, true, false, false],
            vec![2.0, 4.0, 1.0, 3.0],
        )
        .unwrap()
    }

    fn table(mu_t: f64, nu: f64, pi1: f64, g1: f64, known: bool) -> CensNuisanceTable {
        CensNuisanceTable {
            mu_t: vec![mu_t; 4],
            nu: vec![nu; 4],
            pi1: vec![pi1; 4],
            g1: vec![g1; 4],
            clip_count: 0,
            known,
        }
    }

    #[test]
    fn ipw_four_sample_enumeration() {
        // π1 = 0.5, g1 = 0.2: labeled weight 1/0.5 + 0.2/(0.8·0.5) = 2.5,
        // unlabeled weight −1/(0.8·0.5) = −2.5.
        let r = estimate_censoring_ipw(&toy(), &table(0.0, 0.0, 0.5, 0.2, true), 0.95).unwrap();
        let expect = (2.5 * 2.0 + 2.5 * 4.0 - 2.5 * 1.0 - 2.5 * 3.0) / 4.0;
        assert!((r.tau_hat - expect).abs() < 1e-12);
        assert!(!r.naive_ci);
        let zero = CensoringDataset::new(Matrix::zeros(4, 1), toy().o, vec![0.0; 4]).unwrap();
        let r = estimate_censoring_ipw(&zero, &table(0.0, 0.0, 0.5, 0.2, false), 0.95).unwrap();
        assert_eq!(r.tau_hat, 0.0);
        assert!(r.naive_ci);
    }

    #[test]
    fn dm_zero_models_and_flag() {
        let r = estimate_censoring_dm(&toy(), &table(0.0, 0.0, 0.5, 0.2, true), 0.95).unwrap();
        assert_eq!(r.tau_hat, 0.0);
        assert!(r.naive_ci);
    }

    #[test]
    fn efficient_report_is_consistent() {
        let r = estimate_censoring_efficient(&toy(), &table(2.5, 1.5, 0.4, 0.3, true), 0.9).unwrap();
        let m = r.influence.iter().sum::<f64>() / 4.0;
        assert!((m - r.tau_hat).abs() < 1e-12);
        assert!(r.ci_lo <= r.tau_hat && r.tau_hat <= r.ci_hi);
        assert!((r.se - (r.var_hat / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn table_must_cover_data() {
        let mut t = table(0.0, 0.0, 0.5, 0.2, true);
        t.g1.pop();
        assert!(estimate_censoring_efficient(&toy(), &t, 0.95).is_err());
        assert!(estimate_censoring_efficient(&toy(), &table(0.0, 0.0, 0.5, 0.2, true), 1.0).is_err());
    }
}
