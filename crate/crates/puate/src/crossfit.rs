//! Cross-fitting: seeded balanced folds and per-fold nuisance fits whose
//! predictions are only ever applied to the held-out fold.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::casecontrol::{CaseControlData, CcNuisanceTable};
use crate::censoring::{CensNuisanceTable, CensoringDataset};
use crate::dgp::{CaseControlTruth, CensoringTruth};
use crate::error::{invalid, PuError, Result};
use crate::pu_nuisance::{
    density_ratio, fit_censoring_propensity, fit_unbiased_pu, CaseControlPropensity,
    CensoringPropensity, PuOptions,
};
use crate::regression::{
    fit_logistic, fit_ols, predict_mean, predict_proba_counted, DesignMatrix, FeatureMap,
    LinearModel, LogisticModel, LogisticOptions, Matrix, DEFAULT_CLIP_EPS,
};
use crate::stats::{clip, derive_seed};

/// Balanced random partition of `0..n` into `folds` groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n: usize,
    pub folds: usize,
    /// Fold id (0-based) of each index.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Training indices for `fold`: everything outside it.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.folds];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

/// Shuffles `0..n` with a seeded generator and deals indices round-robin.
pub fn make_folds(n: usize, folds: usize, seed: u64) -> Result<FoldAssignment> {
    if folds < 2 {
        return invalid(format!("need at least 2 folds, got {folds}"));
    }
    if folds > n {
        return invalid(format!("{folds} folds for {n} samples"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    Ok(FoldAssignment { n, folds, fold_of })
}

/// Model settings shared by every nuisance fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceOptions {
    /// Features for the outcome regressions μ_T, ν, μ_U.
    pub outcome_features: FeatureMap,
    /// Features for π and the PU propensities.
    pub propensity_features: FeatureMap,
    pub ridge: f64,
    pub clip_eps: f64,
    pub logistic: LogisticOptions,
    pub pu: PuOptions,
}

impl Default for NuisanceOptions {
    fn default() -> Self {
        Self {
            outcome_features: FeatureMap::Identity,
            propensity_features: FeatureMap::Identity,
            ridge: 0.0,
            clip_eps: DEFAULT_CLIP_EPS,
            logistic: LogisticOptions::default(),
            pu: PuOptions::default(),
        }
    }
}

/// Where g(1|x) comes from in the censoring design.
#[derive(Clone)]
pub enum GSource {
    /// The true function.
    Known(Arc<dyn CensoringTruth>),
    /// Elkan–Noto refit on each training complement.
    PluginPerFold,
    /// Elkan–Noto fit once on an auxiliary sample, shared across folds.
    Auxiliary(CensoringPropensity),
    /// Known g(1|Xᵢ) at every sample, e.g. read from a file.
    Values(Arc<Vec<f64>>),
}

impl std::fmt::Debug for GSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GSource::Known(_) => f.write_str("Known"),
            GSource::PluginPerFold => f.write_str("PluginPerFold"),
            GSource::Auxiliary(cp) => f.debug_tuple("Auxiliary").field(cp).finish(),
            GSource::Values(v) => write!(f, "Values({} samples)", v.len()),
        }
    }
}

/// Models fitted on one training complement.
#[derive(Clone, Debug)]
pub struct CensFoldModels {
    pub mu_t: LinearModel,
    pub nu: LinearModel,
    pub pi: LogisticModel,
    /// Per-fold Elkan–Noto propensity (plug-in source only).
    pub g: Option<CensoringPropensity>,
    /// Indices the models were fitted on.
    pub train: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FoldNuisancesCens {
    pub folds: FoldAssignment,
    pub per_fold: Vec<CensFoldModels>,
    pub g_source: GSource,
    pub opts: NuisanceOptions,
}

fn degenerate(fold: usize, reason: &str) -> PuError {
    PuError::DegenerateFold {
        fold,
        reason: reason.into(),
    }
}

/// Fits μ_T (OLS on labeled), ν (OLS on unlabeled) and π (logistic O ~ X) on
/// each training complement, plus the per-fold g when requested.
pub fn fit_nuisances_censoring(
    data: &CensoringDataset,
    folds: &FoldAssignment,
    g_source: GSource,
    opts: &NuisanceOptions,
) -> Result<FoldNuisancesCens> {
    if folds.n != data.len() {
        return invalid("fold assignment does not match the data size");
    }
    if let GSource::Values(v) = &g_source {
        if v.len() != data.len() {
            return invalid("known g values do not cover every sample");
        }
    }
    let out_design = DesignMatrix::with_features(&data.x, opts.outcome_features)?;
    let prop_design = DesignMatrix::with_features(&data.x, opts.propensity_features)?;
    let mut per_fold = Vec::with_capacity(folds.folds);
    for fold in 0..folds.folds {
        let train = folds.complement(fold);
        let labeled: Vec<usize> = train.iter().copied().filter(|&i| data.o[i]).collect();
        let unlabeled: Vec<usize> = train.iter().copied().filter(|&i| !data.o[i]).collect();
        if labeled.is_empty() {
            return Err(degenerate(fold, "training complement has no O=1 samples"));
        }
        if unlabeled.is_empty() {
            return Err(degenerate(fold, "training complement has no O=0 samples"));
        }
        let ys = |rows: &[usize]| rows.iter().map(|&i| data.y[i]).collect::<Vec<_>>();
        let mu_t = fit_ols(&out_design.select_rows(&labeled), &ys(&labeled), opts.ridge)?;
        let nu = fit_ols(&out_design.select_rows(&unlabeled), &ys(&unlabeled), opts.ridge)?;
        let o_train: Vec<bool> = train.iter().map(|&i| data.o[i]).collect();
        let pi = fit_logistic(&prop_design.select_rows(&train), &o_train, &opts.logistic)?;
        let g = match g_source {
            GSource::PluginPerFold => Some(fit_censoring_propensity(
                &data.x.select_rows(&train),
                &o_train,
                opts.propensity_features,
                opts.clip_eps,
            )?),
            _ => None,
        };
        per_fold.push(CensFoldModels {
            mu_t,
            nu,
            pi,
            g,
            train,
        });
    }
    Ok(FoldNuisancesCens {
        folds: folds.clone(),
        per_fold,
        g_source,
        opts: *opts,
    })
}

impl FoldNuisancesCens {
    /// Evaluates every sample with the models of its own fold.
    pub fn evaluate(&self, data: &CensoringDataset) -> Result<CensNuisanceTable> {
        let n = data.len();
        if n != self.folds.n {
            return invalid("data size differs from the fitted folds");
        }
        let eps = self.opts.clip_eps;
        let mut t = CensNuisanceTable {
            mu_t: vec![0.0; n],
            nu: vec![0.0; n],
            pi1: vec![0.0; n],
            g1: vec![0.0; n],
            clip_count: 0,
            known: false,
        };
        for (fold, models) in self.per_fold.iter().enumerate() {
            let rows = self.folds.members(fold);
            if rows.is_empty() {
                continue;
            }
            let xf = data.x.select_rows(&rows);
            let od = DesignMatrix::with_features(&xf, self.opts.outcome_features)?;
            let pd = DesignMatrix::with_features(&xf, self.opts.propensity_features)?;
            let mu_t = predict_mean(&models.mu_t, &od)?;
            let nu = predict_mean(&models.nu, &od)?;
            let (pi1, c_pi) = predict_proba_counted(&models.pi, &pd, eps)?;
            t.clip_count += c_pi;
            let g1: Vec<f64> = match &self.g_source {
                GSource::Known(truth) => rows
                    .iter()
                    .map(|&i| {
                        let (g, c) = clip(truth.g1(&data.row(i)), eps, 1.0 - eps);
                        t.clip_count += c as usize;
                        g
                    })
                    .collect(),
                GSource::PluginPerFold => {
                    let cp = models.g.as_ref().expect("plug-in propensity fitted per fold");
                    let (g, c) = cp.g1_values(&xf)?;
                    t.clip_count += c;
                    g
                }
                GSource::Auxiliary(cp) => {
                    let (g, c) = cp.g1_values(&xf)?;
                    t.clip_count += c;
                    g
                }
                GSource::Values(v) => rows
                    .iter()
                    .map(|&i| {
                        let (g, c) = clip(v[i], eps, 1.0 - eps);
                        t.clip_count += c as usize;
                        g
                    })
                    .collect(),
            };
            for (k, &i) in rows.iter().enumerate() {
                t.mu_t[i] = mu_t[k];
                t.nu[i] = nu[k];
                t.pi1[i] = pi1[k];
                t.g1[i] = g1[k];
            }
        }
        Ok(t)
    }

    /// True when no sample's models were trained on that sample.
    pub fn provenance_ok(&self) -> bool {
        self.per_fold.iter().enumerate().all(|(fold, m)| {
            m.train.iter().all(|&i| self.folds.fold_of[i] != fold)
                && m.train.len() + self.folds.members(fold).len() == self.folds.n
        })
    }
}

/// Where e(1|x) (and hence r) comes from in the case-control design.
#[derive(Clone)]
pub enum ESource {
    Known(Arc<dyn CaseControlTruth>),
    /// One unbiased-PU fit on the full data, shared by all folds.
    Global(CaseControlPropensity),
    /// Unbiased-PU refit on each pair of training complements.
    PerFold { class_prior: f64 },
    /// Known e(1|x) at every treated and unlabeled sample.
    Values {
        class_prior: f64,
        treated: Arc<Vec<f64>>,
        unlabeled: Arc<Vec<f64>>,
    },
}

impl std::fmt::Debug for ESource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ESource::Known(_) => f.write_str("Known"),
            ESource::Global(cp) => f.debug_tuple("Global").field(cp).finish(),
            ESource::PerFold { class_prior } => {
                f.debug_struct("PerFold").field("class_prior", class_prior).finish()
            }
            ESource::Values { class_prior, .. } => {
                f.debug_struct("Values").field("class_prior", class_prior).finish()
            }
        }
    }
}

/// Fits the global unbiased-PU propensity on all treated and unlabeled covariates.
pub fn fit_global_e(
    data: &CaseControlData,
    class_prior: f64,
    opts: &NuisanceOptions,
) -> Result<ESource> {
    let pu = PuOptions {
        clip_eps: opts.clip_eps,
        ..opts.pu
    };
    Ok(ESource::Global(fit_unbiased_pu(
        &data.x_t,
        &data.x_u,
        class_prior,
        opts.propensity_features,
        &pu,
    )?))
}

#[derive(Clone, Debug)]
pub struct CcFoldModels {
    pub mu_t: LinearModel,
    pub mu_u: LinearModel,
    pub e: Option<CaseControlPropensity>,
    pub train_t: Vec<usize>,
    pub train_u: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FoldNuisancesCC {
    pub folds_t: FoldAssignment,
    pub folds_u: FoldAssignment,
    pub per_fold: Vec<CcFoldModels>,
    pub e_source: ESource,
    pub opts: NuisanceOptions,
}

/// Independent fold assignments on the treated and unlabeled samples; μ_T from
/// the treated complement, μ_U from the unlabeled complement.
pub fn fit_nuisances_casecontrol(
    data: &CaseControlData,
    folds: usize,
    seed: u64,
    e_source: ESource,
    opts: &NuisanceOptions,
) -> Result<FoldNuisancesCC> {
    if let ESource::Values {
        treated, unlabeled, ..
    } = &e_source
    {
        if treated.len() != data.m() || unlabeled.len() != data.l() {
            return invalid("known e values do not cover every sample");
        }
    }
    let folds_t = make_folds(data.m(), folds, derive_seed(seed, 1, 0))?;
    let folds_u = make_folds(data.l(), folds, derive_seed(seed, 2, 0))?;
    let dt = DesignMatrix::with_features(&data.x_t, opts.outcome_features)?;
    let du = DesignMatrix::with_features(&data.x_u, opts.outcome_features)?;
    let mut per_fold = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train_t = folds_t.complement(fold);
        let train_u = folds_u.complement(fold);
        let yt: Vec<f64> = train_t.iter().map(|&j| data.y_t[j]).collect();
        let yu: Vec<f64> = train_u.iter().map(|&k| data.y_u[k]).collect();
        let mu_t = fit_ols(&dt.select_rows(&train_t), &yt, opts.ridge)
            .map_err(|e| degenerate(fold, &format!("treated outcome fit: {e}")))?;
        let mu_u = fit_ols(&du.select_rows(&train_u), &yu, opts.ridge)
            .map_err(|e| degenerate(fold, &format!("unlabeled outcome fit: {e}")))?;
        let e = match e_source {
            ESource::PerFold { class_prior } => Some(fit_unbiased_pu(
                &data.x_t.select_rows(&train_t),
                &data.x_u.select_rows(&train_u),
                class_prior,
                opts.propensity_features,
                &PuOptions {
                    clip_eps: opts.clip_eps,
                    ..opts.pu
                },
            )?),
            _ => None,
        };
        per_fold.push(CcFoldModels {
            mu_t,
            mu_u,
            e,
            train_t,
            train_u,
        });
    }
    Ok(FoldNuisancesCC {
        folds_t,
        folds_u,
        per_fold,
        e_source,
        opts: *opts,
    })
}

impl FoldNuisancesCC {
    fn e_values(
        &self,
        models: &CcFoldModels,
        x: &Matrix,
        rows: &[usize],
        treated: bool,
        clips: &mut usize,
    ) -> Result<Vec<f64>> {
        let eps = self.opts.clip_eps;
        match &self.e_source {
            ESource::Values {
                treated: vt,
                unlabeled: vu,
                ..
            } => {
                let v = if treated { vt } else { vu };
                Ok(rows
                    .iter()
                    .map(|&i| {
                        let (e, c) = clip(v[i], eps, 1.0 - eps);
                        *clips += c as usize;
                        e
                    })
                    .collect())
            }
            ESource::Known(truth) => Ok(rows
                .iter()
                .map(|&i| {
                    let row: Vec<f64> = x.row(i).iter().copied().collect();
                    let (e, c) = clip(truth.e1(&row), eps, 1.0 - eps);
                    *clips += c as usize;
                    e
                })
                .collect()),
            ESource::Global(cp) => {
                let (e, c) = cp.e1_values(&x.select_rows(rows))?;
                *clips += c;
                Ok(e)
            }
            ESource::PerFold { .. } => {
                let cp = models.e.as_ref().expect("per-fold propensity fitted");
                let (e, c) = cp.e1_values(&x.select_rows(rows))?;
                *clips += c;
                Ok(e)
            }
        }
    }

    fn class_prior(&self, models: &CcFoldModels) -> f64 {
        match &self.e_source {
            ESource::Known(t) => t.class_prior(),
            ESource::Global(cp) => cp.class_prior,
            ESource::PerFold { .. } => models.e.as_ref().map_or(f64::NAN, |e| e.class_prior),
            ESource::Values { class_prior, .. } => *class_prior,
        }
    }

    pub fn evaluate(&self, data: &CaseControlData) -> Result<CcNuisanceTable> {
        let (m, l) = (data.m(), data.l());
        if m != self.folds_t.n || l != self.folds_u.n {
            return invalid("data size differs from the fitted folds");
        }
        let mut t = CcNuisanceTable {
            t_mu_t: vec![0.0; m],
            t_e1: vec![0.0; m],
            t_r: vec![0.0; m],
            u_mu_t: vec![0.0; l],
            u_mu_u: vec![0.0; l],
            u_e1: vec![0.0; l],
            clip_count: 0,
            known: false,
        };
        let eps = self.opts.clip_eps;
        for (fold, models) in self.per_fold.iter().enumerate() {
            let prior = self.class_prior(models);
            let rows_t = self.folds_t.members(fold);
            let rows_u = self.folds_u.members(fold);
            let dt = DesignMatrix::with_features(
                &data.x_t.select_rows(&rows_t),
                self.opts.outcome_features,
            )?;
            let du = DesignMatrix::with_features(
                &data.x_u.select_rows(&rows_u),
                self.opts.outcome_features,
            )?;
            let mt = predict_mean(&models.mu_t, &dt)?;
            let et = self.e_values(models, &data.x_t, &rows_t, true, &mut t.clip_count)?;
            for (k, &j) in rows_t.iter().enumerate() {
                let (r, c) = density_ratio(et[k], prior, eps);
                t.clip_count += c as usize;
                t.t_mu_t[j] = mt[k];
                t.t_e1[j] = et[k];
                t.t_r[j] = r;
            }
            let mtu = predict_mean(&models.mu_t, &du)?;
            let muu = predict_mean(&models.mu_u, &du)?;
            let eu = self.e_values(models, &data.x_u, &rows_u, false, &mut t.clip_count)?;
            for (k, &i) in rows_u.iter().enumerate() {
                t.u_mu_t[i] = mtu[k];
                t.u_mu_u[i] = muu[k];
                t.u_e1[i] = eu[k];
            }
        }
        Ok(t)
    }

    pub fn provenance_ok(&self) -> bool {
        self.per_fold.iter().enumerate().all(|(fold, m)| {
            m.train_t.iter().all(|&j| self.folds_t.fold_of[j] != fold)
                && m.train_u.iter().all(|&k| self.folds_u.fold_of[k] != fold)
        })
    }
}
