//! ATE estimators for the case-control design: a pure treated sample and an
//! independent unlabeled sample from the population mixture.

use serde::{Deserialize, Serialize};

use crate::dgp::CaseControlTruth;
use crate::error::{invalid, Result};
use crate::pu_nuisance::density_ratio;
use crate::regression::{check_clip_eps, Matrix};
use crate::report::{check_level, EstimateReport, Method};
use crate::stats::{clip, mean, sample_variance};

/// Treated sample {(X_T, Y(1))} of size m and unlabeled sample {(X, Y_U)} of size l.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseControlData {
    pub x_t: Matrix,
    pub y_t: Vec<f64>,
    pub x_u: Matrix,
    pub y_u: Vec<f64>,
}

impl CaseControlData {
    pub fn new(x_t: Matrix, y_t: Vec<f64>, x_u: Matrix, y_u: Vec<f64>) -> Result<Self> {
        if x_t.nrows() != y_t.len() || x_u.nrows() != y_u.len() {
            return invalid("case-control covariates and outcomes differ in length");
        }
        if y_t.is_empty() || y_u.is_empty() {
            return invalid("both case-control samples need at least one row");
        }
        if x_t.ncols() != x_u.ncols() {
            return invalid("treated and unlabeled covariates differ in dimension");
        }
        if x_t
            .iter()
            .chain(x_u.iter())
            .chain(y_t.iter())
            .chain(y_u.iter())
            .any(|v| !v.is_finite())
        {
            return invalid("case-control data contains non-finite values");
        }
        Ok(Self { x_t, y_t, x_u, y_u })
    }

    pub fn m(&self) -> usize {
        self.y_t.len()
    }

    pub fn l(&self) -> usize {
        self.y_u.len()
    }

    /// Treated share α = m / (m + l).
    pub fn alpha(&self) -> f64 {
        self.m() as f64 / (self.m() + self.l()) as f64
    }
}

/// Nuisance values at each treated (`t_*`) and unlabeled (`u_*`) sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcNuisanceTable {
    pub t_mu_t: Vec<f64>,
    pub t_e1: Vec<f64>,
    pub t_r: Vec<f64>,
    pub u_mu_t: Vec<f64>,
    pub u_mu_u: Vec<f64>,
    pub u_e1: Vec<f64>,
    pub clip_count: usize,
    pub known: bool,
}

impl CcNuisanceTable {
    /// Evaluates the true nuisances; e is clipped and r recomputed from the clipped e.
    pub fn from_truth(
        data: &CaseControlData,
        truth: &dyn CaseControlTruth,
        clip_eps: f64,
    ) -> Result<Self> {
        let rows = |x: &Matrix| -> Vec<Vec<f64>> {
            x.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        let (xt, xu) = (rows(&data.x_t), rows(&data.x_u));
        Self::from_values(
            xt.iter().map(|x| truth.mu_t(x)).collect(),
            xt.iter().map(|x| truth.e1(x)).collect(),
            xu.iter().map(|x| truth.mu_t(x)).collect(),
            xu.iter().map(|x| truth.mu_u(x)).collect(),
            xu.iter().map(|x| truth.e1(x)).collect(),
            truth.class_prior(),
            clip_eps,
        )
    }

    /// Builds a table of known nuisance values, clipping e and deriving r
    /// from the clipped e at the treated samples.
    pub fn from_values(
        t_mu_t: Vec<f64>,
        t_e1: Vec<f64>,
        u_mu_t: Vec<f64>,
        u_mu_u: Vec<f64>,
        u_e1: Vec<f64>,
        class_prior: f64,
        clip_eps: f64,
    ) -> Result<Self> {
        check_clip_eps(clip_eps)?;
        if !(class_prior > 0.0 && class_prior <= 1.0) {
            return invalid(format!("class prior must be in (0, 1], got {class_prior}"));
        }
        let mut clip_count = 0;
        let mut clip_e = |e: Vec<f64>| -> Vec<f64> {
            e.into_iter()
                .map(|v| {
                    let (v, c) = clip(v, clip_eps, 1.0 - clip_eps);
                    clip_count += c as usize;
                    v
                })
                .collect()
        };
        let t_e1 = clip_e(t_e1);
        let u_e1 = clip_e(u_e1);
        let t_r = t_e1
            .iter()
            .map(|&e| {
                let (r, c) = density_ratio(e, class_prior, clip_eps);
                clip_count += c as usize;
                r
            })
            .collect();
        Ok(Self {
            t_mu_t,
            t_e1,
            t_r,
            u_mu_t,
            u_mu_u,
            u_e1,
            clip_count,
            known: true,
        })
    }

    fn check(&self, data: &CaseControlData) -> Result<()> {
        let (m, l) = (data.m(), data.l());
        if self.t_mu_t.len() != m
            || self.t_e1.len() != m
            || self.t_r.len() != m
            || self.u_mu_t.len() != l
            || self.u_mu_u.len() != l
            || self.u_e1.len() != l
        {
            return invalid("nuisance table does not cover every sample");
        }
        Ok(())
    }
}

/// Form of the two case-control score components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcScore {
    /// Pathwise derivative of τ = E[μ_T/e0 − μ_U/e0] under the unlabeled law:
    /// treated weight r/e0, unlabeled residual entering with a minus sign.
    #[default]
    Derived,
    /// Treated weight (1 − e1/e0)·r and unlabeled residual added. Not mean-zero
    /// around τ in general; kept for comparison.
    Literal,
}

/// Treated-sample score component.
pub fn score_treated(y1: f64, mu_t: f64, e1: f64, r: f64, form: CcScore) -> f64 {
    let e0 = 1.0 - e1;
    match form {
        CcScore::Derived => r * (y1 - mu_t) / e0,
        CcScore::Literal => (1.0 - e1 / e0) * (y1 - mu_t) * r,
    }
}

/// Unlabeled-sample score component.
pub fn score_unlabeled(y_u: f64, mu_t: f64, mu_u: f64, e1: f64, form: CcScore) -> f64 {
    let e0 = 1.0 - e1;
    let plug_in = mu_t - mu_u / e0 + e1 / e0 * mu_t;
    match form {
        CcScore::Derived => -(y_u - mu_u) / e0 + plug_in,
        CcScore::Literal => (y_u - mu_u) / e0 + plug_in,
    }
}

/// Score components at every treated and unlabeled sample.
pub fn cc_scores(
    data: &CaseControlData,
    nuis: &CcNuisanceTable,
    form: CcScore,
) -> Result<(Vec<f64>, Vec<f64>)> {
    nuis.check(data)?;
    let st = (0..data.m())
        .map(|j| score_treated(data.y_t[j], nuis.t_mu_t[j], nuis.t_e1[j], nuis.t_r[j], form))
        .collect();
    let su = (0..data.l())
        .map(|k| score_unlabeled(data.y_u[k], nuis.u_mu_t[k], nuis.u_mu_u[k], nuis.u_e1[k], form))
        .collect();
    Ok((st, su))
}

/// τ̂ = mean_T(a) + mean_U(b) with the stratified variance Var_T/α + Var_U/(1−α).
///
/// The stored influence vector stacks (n/m)·a and (n/l)·b so its mean equals τ̂.
fn stratified_report(
    method: Method,
    a: Vec<f64>,
    b: Vec<f64>,
    level: f64,
    clip_count: usize,
    naive_ci: bool,
) -> Result<EstimateReport> {
    let (m, l) = (a.len(), b.len());
    let n = m + l;
    let alpha = m as f64 / n as f64;
    let tau = mean(&a) + mean(&b);
    let var = stratified_variance(&a, &b, alpha);
    let influence = a
        .iter()
        .map(|v| v * n as f64 / m as f64)
        .chain(b.iter().map(|v| v * n as f64 / l as f64))
        .collect();
    EstimateReport::from_variance(method, tau, var, n, level, influence, clip_count, naive_ci)
}

/// (1/α)·Var̂(a) + (1/(1−α))·Var̂(b).
pub fn stratified_variance(a: &[f64], b: &[f64], alpha: f64) -> f64 {
    sample_variance(a) / alpha + sample_variance(b) / (1.0 - alpha)
}

pub fn estimate_cc_efficient(
    data: &CaseControlData,
    nuis: &CcNuisanceTable,
    form: CcScore,
    level: f64,
) -> Result<EstimateReport> {
    check_level(level)?;
    let (st, su) = cc_scores(data, nuis, form)?;
    stratified_report(Method::Efficient, st, su, level, nuis.clip_count, false)
}

/// IPW: E[Y(1)] from r-weighted treated outcomes; E[Y(0)] from unlabeled
/// outcomes over e0 minus the r-weighted treated contamination term.
pub fn estimate_cc_ipw(
    data: &CaseControlData,
    nuis: &CcNuisanceTable,
    level: f64,
) -> Result<EstimateReport> {
    check_level(level)?;
    nuis.check(data)?;
    let a = (0..data.m())
        .map(|j| {
            let e1 = nuis.t_e1[j];
            data.y_t[j] * nuis.t_r[j] * (1.0 + e1 / (1.0 - e1))
        })
        .collect();
    let b = (0..data.l())
        .map(|k| -data.y_u[k] / (1.0 - nuis.u_e1[k]))
        .collect();
    stratified_report(Method::Ipw, a, b, level, nuis.clip_count, !nuis.known)
}

/// Plug-in of the non-residual part of the unlabeled score; naive interval.
pub fn estimate_cc_dm(
    data: &CaseControlData,
    nuis: &CcNuisanceTable,
    level: f64,
) -> Result<EstimateReport> {
    check_level(level)?;
    nuis.check(data)?;
    let b: Vec<f64> = (0..data.l())
        .map(|k| {
            let e1 = nuis.u_e1[k];
            let e0 = 1.0 - e1;
            nuis.u_mu_t[k] - nuis.u_mu_u[k] / e0 + e1 / e0 * nuis.u_mu_t[k]
        })
        .collect();
    let n = data.m() + data.l();
    let tau = mean(&b);
    let var = sample_variance(&b) / (1.0 - data.alpha());
    // Treated samples carry no DM information; zeros keep mean(influence) = τ̂.
    let influence = std::iter::repeat_n(0.0, data.m())
        .chain(b.iter().map(|v| v * n as f64 / data.l() as f64))
        .collect();
    EstimateReport::from_variance(Method::Dm, tau, var, n, level, influence, nuis.clip_count, true)
}

pub fn estimate_casecontrol(
    method: Method,
    data: &CaseControlData,
    nuis: &CcNuisanceTable,
    form: CcScore,
    level: f64,
) -> Result<EstimateReport> {
    match method {
        Method::Efficient => estimate_cc_efficient(data, nuis, form, level),
        Method::Ipw => estimate_cc_ipw(data, nuis, level),
        Method::Dm => estimate_cc_dm(data, nuis, level),
    }
}
