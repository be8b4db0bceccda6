//! Point estimate, variance and confidence interval returned by every estimator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::{mean, normal_critical, sample_variance};

/// Estimator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ipw,
    Dm,
    Efficient,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ipw, Method::Dm, Method::Efficient];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Ipw => "IPW",
            Method::Dm => "DM",
            Method::Efficient => "Efficient",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub tau_hat: f64,
    /// Plug-in estimate of the asymptotic variance V.
    pub var_hat: f64,
    /// sqrt(var_hat / n).
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
    /// Number of samples the variance is scaled by (n, or m + l).
    pub n: usize,
    /// Per-sample influence (or summand) values whose mean is `tau_hat`.
    pub influence: Vec<f64>,
    /// Probability and ratio clipping events in the nuisances used.
    pub clip_count: usize,
    /// True when the interval ignores nuisance-estimation error.
    pub naive_ci: bool,
}

impl EstimateReport {
    /// Builds a report from an estimate, its asymptotic variance and the sample size.
    #[allow(clippy::too_many_arguments)]
    pub fn from_variance(
        method: Method,
        tau_hat: f64,
        var_hat: f64,
        n: usize,
        level: f64,
        influence: Vec<f64>,
        clip_count: usize,
        naive_ci: bool,
    ) -> Result<Self> {
        check_level(level)?;
        if n == 0 {
            return invalid("report needs at least one sample");
        }
        let se = (var_hat / n as f64).sqrt();
        let half = normal_critical(level) * se;
        Ok(Self {
            method,
            tau_hat,
            var_hat,
            se,
            ci_lo: tau_hat - half,
            ci_hi: tau_hat + half,
            level,
            n,
            influence,
            clip_count,
            naive_ci,
        })
    }

    /// Mean and sample variance of i.i.d. per-sample values.
    pub fn from_summands(
        method: Method,
        values: Vec<f64>,
        level: f64,
        clip_count: usize,
        naive_ci: bool,
    ) -> Result<Self> {
        let tau = mean(&values);
        let var = sample_variance(&values);
        let n = values.len();
        Self::from_variance(method, tau, var, n, level, values, clip_count, naive_ci)
    }

    pub fn covers(&self, tau0: f64) -> bool {
        self.ci_lo <= tau0 && tau0 <= self.ci_hi
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("confidence level must be in (0, 1), got {level}"));
    }
    Ok(())
}
