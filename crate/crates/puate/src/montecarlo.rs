//! Repeated-trial experiments: seeded data generation, nuisance fitting and
//! estimation per trial, aggregated into MSE, bias, coverage and histograms.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casecontrol::{estimate_casecontrol, CaseControlData, CcNuisanceTable, CcScore};
use crate::censoring::{estimate_censoring, CensNuisanceTable, CensoringDataset};
use crate::crossfit::{
    fit_global_e, fit_nuisances_casecontrol, fit_nuisances_censoring, make_folds, ESource,
    GSource, NuisanceOptions,
};
use crate::dgp::{
    derive_pu_views, load_covariates_csv, simulate_response_surface, standin_covariates,
    surface_means, CaseControlModel, CaseControlScenario, CensoringFlavor, CensoringModel,
    CensoringScenario, CovariateSchema, CovariateTable, OutcomeFlavor, PuMode, PuView,
    ResponseSurfaceSpec, Surface,
};
use crate::error::{invalid, PuError, Result};
use crate::pu_nuisance::fit_censoring_propensity_from_aux;
use crate::regression::FeatureMap;
use crate::report::{check_level, EstimateReport, Method};
use crate::stats::{derive_seed, mean, population_variance};

const TRIAL_STREAM: u64 = 0x7121;
const HISTOGRAM_BINS: usize = 30;

/// Which nuisances an estimator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuisanceSource {
    /// Every nuisance estimated (PU propensity included).
    Estimated,
    /// True g (censoring) or e (case-control); outcome models and π estimated.
    TruePropensity,
    /// g from an auxiliary labeled/unlabeled sample (censoring only).
    Auxiliary,
    /// Every nuisance is the true function.
    Oracle,
}

impl NuisanceSource {
    pub fn label(&self, censoring: bool) -> &'static str {
        match (self, censoring) {
            (NuisanceSource::Estimated, true) => "estimated g",
            (NuisanceSource::Estimated, false) => "estimated e",
            (NuisanceSource::TruePropensity, true) => "true g",
            (NuisanceSource::TruePropensity, false) => "true e",
            (NuisanceSource::Auxiliary, _) => "auxiliary g",
            (NuisanceSource::Oracle, _) => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub method: Method,
    pub source: NuisanceSource,
}

impl EstimatorSpec {
    pub fn new(method: Method, source: NuisanceSource) -> Self {
        Self { method, source }
    }
}

/// Semi-synthetic experiment over a fixed covariate table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiSyntheticScenario {
    pub surface: Surface,
    pub mode: PuMode,
    /// Covariate CSV; the synthetic stand-in table is used when absent.
    #[serde(default)]
    pub covariates_csv: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<CovariateSchema>,
    #[serde(default)]
    pub design_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "kebab-case")]
pub enum ScenarioSpec {
    Censoring(CensoringScenario),
    CaseControl(CaseControlScenario),
    SemiSynthetic(SemiSyntheticScenario),
}

impl ScenarioSpec {
    pub fn is_censoring(&self) -> bool {
        match self {
            ScenarioSpec::Censoring(_) => true,
            ScenarioSpec::CaseControl(_) => false,
            ScenarioSpec::SemiSynthetic(s) => matches!(s.mode, PuMode::Censoring { .. }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub scenario: ScenarioSpec,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub nuisance: NuisanceOptions,
    #[serde(default)]
    pub cc_score: CcScore,
    /// Size of the auxiliary sample for [`NuisanceSource::Auxiliary`].
    #[serde(default = "default_aux_n")]
    pub aux_n: usize,
}

fn default_estimators() -> Vec<EstimatorSpec> {
    Method::ALL
        .iter()
        .map(|&m| EstimatorSpec::new(m, NuisanceSource::Estimated))
        .collect()
}

fn default_trials() -> usize {
    500
}

fn default_base_seed() -> u64 {
    1
}

fn default_level() -> f64 {
    0.95
}

fn default_folds() -> usize {
    2
}

fn default_aux_n() -> usize {
    10_000
}

impl McConfig {
    pub fn new(scenario: ScenarioSpec, estimators: Vec<EstimatorSpec>, trials: usize) -> Self {
        Self {
            scenario,
            estimators,
            trials,
            base_seed: default_base_seed(),
            level: default_level(),
            workers: 0,
            folds: default_folds(),
            nuisance: NuisanceOptions::default(),
            cc_score: CcScore::default(),
            aux_n: default_aux_n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be >= 1");
        }
        if self.estimators.is_empty() {
            return invalid("no estimators configured");
        }
        check_level(self.level)?;
        if !(2..=10).contains(&self.folds) {
            return invalid(format!("folds must be in 2..=10, got {}", self.folds));
        }
        self.nuisance.outcome_features.validate()?;
        self.nuisance.propensity_features.validate()?;
        let censoring = self.scenario.is_censoring();
        for e in &self.estimators {
            if e.source == NuisanceSource::Auxiliary && !censoring {
                return invalid("auxiliary propensity is only defined for the censoring design");
            }
            if matches!(self.scenario, ScenarioSpec::SemiSynthetic(_))
                && e.source != NuisanceSource::Estimated
            {
                return invalid("semi-synthetic runs only support estimated nuisances");
            }
        }
        match &self.scenario {
            ScenarioSpec::Censoring(s) => s.validate(),
            ScenarioSpec::CaseControl(s) => s.validate(),
            ScenarioSpec::SemiSynthetic(_) => Ok(()),
        }
    }
}

/// One estimator's result in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub estimator: String,
    pub tau_hat: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
    pub clip_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub estimator: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() || bins == 0 {
            return Self {
                edges: vec![],
                counts: vec![],
            };
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0; bins];
        for v in finite {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub method: Method,
    pub source: NuisanceSource,
    pub mse: f64,
    pub bias: f64,
    pub coverage: f64,
    /// Across-trial variance of τ̂ (divisor T), so mse = bias² + variance.
    pub variance: f64,
    pub mean_clip_count: f64,
    pub tau_hats: Vec<f64>,
    /// (τ̂ − τ₀)/se per successful trial.
    pub standardized: Vec<f64>,
    pub failed: usize,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub config: McConfig,
    pub tau0: f64,
    pub estimators: Vec<EstimatorSummary>,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

impl McSummary {
    pub fn get(&self, method: Method, source: NuisanceSource) -> Option<&EstimatorSummary> {
        self.estimators
            .iter()
            .find(|e| e.method == method && e.source == source)
    }
}

/// Experiment-level state fixed before the first trial.
enum Design {
    Censoring {
        model: CensoringModel,
        n: usize,
    },
    CaseControl {
        model: CaseControlModel,
        m: usize,
        l: usize,
    },
    SemiSynthetic {
        table: CovariateTable,
        treatment: Vec<bool>,
        spec: ResponseSurfaceSpec,
        mode: PuMode,
    },
}

impl Design {
    fn build(sc: &ScenarioSpec) -> Result<(Self, f64)> {
        match sc {
            ScenarioSpec::Censoring(s) => {
                let model = s.resolve()?;
                Ok((Design::Censoring { model, n: s.n }, s.tau0))
            }
            ScenarioSpec::CaseControl(s) => {
                let model = s.resolve()?;
                Ok((
                    Design::CaseControl {
                        model,
                        m: s.m,
                        l: s.l,
                    },
                    s.tau0,
                ))
            }
            ScenarioSpec::SemiSynthetic(s) => {
                let table = match &s.covariates_csv {
                    Some(path) => {
                        let schema = s.schema.clone().ok_or_else(|| {
                            PuError::SchemaError("covariate CSV given without a schema".into())
                        })?;
                        load_covariates_csv(path, &schema)?
                    }
                    None => standin_covariates(s.design_seed),
                };
                let treatment = table.treatment.clone().ok_or_else(|| {
                    PuError::SchemaError("semi-synthetic covariates need a treatment column".into())
                })?;
                let spec = ResponseSurfaceSpec::draw(s.surface, table.x.ncols(), s.design_seed);
                let truth = surface_means(&spec, &table.x, &treatment)?;
                Ok((
                    Design::SemiSynthetic {
                        table,
                        treatment,
                        spec,
                        mode: s.mode,
                    },
                    truth.ate,
                ))
            }
        }
    }
}

type TrialOutput = Vec<std::result::Result<EstimateReport, String>>;

fn censoring_tables(
    cfg: &McConfig,
    data: &CensoringDataset,
    oracle: Option<&CensoringModel>,
    seed: u64,
) -> HashMap<NuisanceSource, std::result::Result<CensNuisanceTable, String>> {
    let mut out = HashMap::new();
    let opts = &cfg.nuisance;
    for spec in &cfg.estimators {
        if out.contains_key(&spec.source) {
            continue;
        }
        let table = (|| -> Result<CensNuisanceTable> {
            if spec.source == NuisanceSource::Oracle {
                let o = oracle.ok_or_else(|| PuError::InvalidInput("no oracle available".into()))?;
                return CensNuisanceTable::from_truth(data, o, opts.clip_eps);
            }
            let folds = make_folds(data.len(), cfg.folds, derive_seed(seed, 1, 0))?;
            let g = match spec.source {
                NuisanceSource::Estimated => GSource::PluginPerFold,
                NuisanceSource::TruePropensity => {
                    let o = oracle
                        .ok_or_else(|| PuError::InvalidInput("no oracle available".into()))?;
                    GSource::Known(Arc::new(o.clone()))
                }
                NuisanceSource::Auxiliary => {
                    let o = oracle
                        .ok_or_else(|| PuError::InvalidInput("no oracle available".into()))?;
                    let aux = o.sample(cfg.aux_n, derive_seed(seed, 2, 0));
                    GSource::Auxiliary(fit_censoring_propensity_from_aux(
                        &aux.data.x,
                        &aux.data.o,
                        opts.propensity_features,
                        opts.clip_eps,
                    )?)
                }
                NuisanceSource::Oracle => unreachable!(),
            };
            fit_nuisances_censoring(data, &folds, g, opts)?.evaluate(data)
        })();
        out.insert(spec.source, table.map_err(|e| e.to_string()));
    }
    out
}

fn casecontrol_tables(
    cfg: &McConfig,
    data: &CaseControlData,
    oracle: Option<&CaseControlModel>,
    class_prior: f64,
    seed: u64,
) -> HashMap<NuisanceSource, std::result::Result<CcNuisanceTable, String>> {
    let mut out = HashMap::new();
    let opts = &cfg.nuisance;
    for spec in &cfg.estimators {
        if out.contains_key(&spec.source) {
            continue;
        }
        let table = (|| -> Result<CcNuisanceTable> {
            let truth = || oracle.ok_or_else(|| PuError::InvalidInput("no oracle available".into()));
            let e = match spec.source {
                NuisanceSource::Oracle => {
                    return CcNuisanceTable::from_truth(data, truth()?, opts.clip_eps)
                }
                NuisanceSource::Estimated => fit_global_e(data, class_prior, opts)?,
                NuisanceSource::TruePropensity => ESource::Known(Arc::new(truth()?.clone())),
                NuisanceSource::Auxiliary => {
                    return invalid("auxiliary propensity is censoring-only")
                }
            };
            fit_nuisances_casecontrol(data, cfg.folds, derive_seed(seed, 1, 0), e, opts)?
                .evaluate(data)
        })();
        out.insert(spec.source, table.map_err(|e| e.to_string()));
    }
    out
}

fn run_one(cfg: &McConfig, design: &Design, trial: usize) -> TrialOutput {
    let seed = derive_seed(cfg.base_seed, TRIAL_STREAM, trial as u64);
    let fail_all = |msg: String| cfg.estimators.iter().map(|_| Err(msg.clone())).collect();
    let cens = |data: &CensoringDataset, oracle: Option<&CensoringModel>| -> TrialOutput {
        let tables = censoring_tables(cfg, data, oracle, seed);
        cfg.estimators
            .iter()
            .map(|spec| {
                let t = tables[&spec.source].as_ref().map_err(Clone::clone)?;
                estimate_censoring(spec.method, data, t, cfg.level).map_err(|e| e.to_string())
            })
            .collect()
    };
    let cc = |data: &CaseControlData, oracle: Option<&CaseControlModel>, prior: f64| {
        let tables = casecontrol_tables(cfg, data, oracle, prior, seed);
        cfg.estimators
            .iter()
            .map(|spec| {
                let t = tables[&spec.source].as_ref().map_err(Clone::clone)?;
                estimate_casecontrol(spec.method, data, t, cfg.cc_score, cfg.level)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    match design {
        Design::Censoring { model, n } => {
            let draw = model.sample(*n, derive_seed(seed, 0, 0));
            cens(&draw.data, Some(model))
        }
        Design::CaseControl { model, m, l } => {
            let draw = model.sample(*m, *l, derive_seed(seed, 0, 0));
            cc(&draw.data, Some(model), model.class_prior)
        }
        Design::SemiSynthetic {
            table,
            treatment,
            spec,
            mode,
        } => {
            let view = simulate_response_surface(spec, &table.x, treatment, derive_seed(seed, 0, 0))
                .and_then(|draw| {
                    derive_pu_views(&table.x, treatment, &draw.y, *mode, derive_seed(seed, 3, 0))
                });
            match view {
                Ok(PuView::Censoring(data)) => cens(&data, None),
                Ok(PuView::CaseControl { data, class_prior }) => cc(&data, None, class_prior),
                Err(e) => fail_all(e.to_string()),
            }
        }
    }
}

/// Runs `cfg.trials` independent trials and aggregates them per estimator.
///
/// Trial seeds are derived from `(base_seed, trial)`, so results do not
/// depend on the worker count. Estimator errors are recorded as failures.
pub fn run_trials(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    let (design, tau0) = Design::build(&cfg.scenario)?;
    let work = || -> Vec<TrialOutput> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_one(cfg, &design, t))
            .collect()
    };
    let outputs = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PuError::InvalidInput(e.to_string()))?
            .install(work)
    } else {
        work()
    };
    Ok(aggregate(cfg, tau0, outputs))
}

fn aggregate(cfg: &McConfig, tau0: f64, outputs: Vec<TrialOutput>) -> McSummary {
    let censoring = cfg.scenario.is_censoring();
    let labels: Vec<String> = cfg
        .estimators
        .iter()
        .map(|e| format!("{} ({})", e.method, e.source.label(censoring)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut per_est: Vec<Vec<&EstimateReport>> = vec![vec![]; cfg.estimators.len()];
    for (trial, out) in outputs.iter().enumerate() {
        for (k, res) in out.iter().enumerate() {
            match res {
                Ok(r) => {
                    records.push(TrialRecord {
                        trial,
                        estimator: labels[k].clone(),
                        tau_hat: r.tau_hat,
                        se: r.se,
                        ci_lo: r.ci_lo,
                        ci_hi: r.ci_hi,
                        covered: r.covers(tau0),
                        clip_count: r.clip_count,
                    });
                    per_est[k].push(r);
                }
                Err(msg) => failures.push(TrialFailure {
                    trial,
                    estimator: labels[k].clone(),
                    message: msg.clone(),
                }),
            }
        }
    }
    let estimators = cfg
        .estimators
        .iter()
        .zip(per_est)
        .zip(&labels)
        .map(|((spec, reps), label)| {
            let tau_hats: Vec<f64> = reps.iter().map(|r| r.tau_hat).collect();
            let err: Vec<f64> = tau_hats.iter().map(|t| (t - tau0).powi(2)).collect();
            let covered = reps.iter().filter(|r| r.covers(tau0)).count();
            EstimatorSummary {
                label: label.clone(),
                method: spec.method,
                source: spec.source,
                mse: mean(&err),
                bias: mean(&tau_hats) - tau0,
                coverage: if reps.is_empty() {
                    f64::NAN
                } else {
                    covered as f64 / reps.len() as f64
                },
                variance: population_variance(&tau_hats),
                mean_clip_count: mean(&reps.iter().map(|r| r.clip_count as f64).collect::<Vec<_>>()),
                standardized: reps.iter().map(|r| (r.tau_hat - tau0) / r.se).collect(),
                failed: cfg.trials - reps.len(),
                histogram: Histogram::from_values(&tau_hats, HISTOGRAM_BINS),
                tau_hats,
            }
        })
        .collect();
    McSummary {
        config: cfg.clone(),
        tau0,
        estimators,
        records,
        failures,
    }
}

/// Renders MSE, bias and coverage with estimators grouped by nuisance source,
/// one column group per source in order of first appearance.
pub fn summarize_table(summaries: &[EstimatorSummary], censoring: bool) -> String {
    if summaries.is_empty() {
        return String::new();
    }
    let mut groups: Vec<(NuisanceSource, Vec<&EstimatorSummary>)> = Vec::new();
    for s in summaries {
        match groups.iter_mut().find(|(src, _)| *src == s.source) {
            Some((_, v)) => v.push(s),
            None => groups.push((s.source, vec![s])),
        }
    }
    const W: usize = 11;
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "");
    for (src, v) in &groups {
        let _ = write!(out, "|{:^width$}", src.label(censoring), width = W * v.len());
    }
    out.push_str("|\n");
    let _ = write!(out, "{:<12}", "");
    for (_, v) in &groups {
        out.push('|');
        for s in v {
            let _ = write!(out, "{:>W$}", s.method.label());
        }
    }
    out.push_str("|\n");
    type Stat = fn(&EstimatorSummary) -> f64;
    let rows: [(&str, Stat); 3] = [
        ("MSE", |s| s.mse),
        ("Bias", |s| s.bias),
        ("Cov. ratio", |s| s.coverage),
    ];
    for (name, f) in rows {
        let _ = write!(out, "{name:<12}");
        for (_, v) in &groups {
            out.push('|');
            for s in v {
                let _ = write!(out, "{:>W$}", fmt_cell(f(s)));
            }
        }
        out.push_str("|\n");
    }
    out
}

fn fmt_cell(v: f64) -> String {
    if !v.is_finite() {
        return "nan".into();
    }
    if v.abs() >= 1e4 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Writes per-trial records (CSV) or the full summary with config echo and
/// histograms (JSON). Floats are written losslessly.
pub fn export_results(summary: &McSummary, format: ExportFormat, path: &Path) -> Result<()> {
    match format {
        ExportFormat::Json => {
            let text = serde_json::to_string_pretty(summary)
                .map_err(|e| PuError::InvalidInput(e.to_string()))?;
            std::fs::write(path, text)?;
        }
        ExportFormat::Csv => {
            let mut out =
                String::from("trial,estimator,tau_hat,se,ci_lo,ci_hi,covered,clip_count\n");
            for r in &summary.records {
                let _ = writeln!(
                    out,
                    "{},\"{}\",{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                    r.trial,
                    r.estimator,
                    r.tau_hat,
                    r.se,
                    r.ci_lo,
                    r.ci_hi,
                    r.covered as u8,
                    r.clip_count
                );
            }
            std::fs::write(path, out)?;
        }
    }
    Ok(())
}

/// Reads back the CSV written by [`export_results`].
pub fn read_records_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| PuError::InvalidInput(e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| PuError::CsvError {
            row: i + 1,
            col: 0,
            message: e.to_string(),
        })?;
        let num = |c: usize| -> Result<f64> {
            rec[c].parse().map_err(|_| PuError::CsvError {
                row: i + 1,
                col: c + 1,
                message: format!("bad number {:?}", &rec[c]),
            })
        };
        out.push(TrialRecord {
            trial: num(0)? as usize,
            estimator: rec[1].to_string(),
            tau_hat: num(2)?,
            se: num(3)?,
            ci_lo: num(4)?,
            ci_hi: num(5)?,
            covered: &rec[6] == "1",
            clip_count: num(7)? as usize,
        });
    }
    Ok(out)
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 6] = [
    "table1-censoring",
    "table1-casecontrol",
    "nonlinear-censoring",
    "nonlinear-casecontrol",
    "surfaceA",
    "surfaceB",
];

fn paired(sources: [NuisanceSource; 2]) -> Vec<EstimatorSpec> {
    sources
        .iter()
        .flat_map(|&s| Method::ALL.iter().map(move |&m| EstimatorSpec::new(m, s)))
        .collect()
}

/// Ready-made experiment configurations. Surface presets return one config
/// per design (censoring, then case-control).
pub fn preset(name: &str) -> Result<Vec<McConfig>> {
    let table1 = paired([NuisanceSource::Estimated, NuisanceSource::TruePropensity]);
    let quad = FeatureMap::Polynomial {
        degree: 2,
        interactions: true,
    };
    let squares = FeatureMap::Polynomial {
        degree: 2,
        interactions: false,
    };
    let cfgs = match name {
        "table1-censoring" => vec![McConfig::new(
            ScenarioSpec::Censoring(CensoringScenario::default()),
            table1,
            500,
        )],
        "table1-casecontrol" => vec![McConfig::new(
            ScenarioSpec::CaseControl(CaseControlScenario::default()),
            table1,
            500,
        )],
        "nonlinear-censoring" => {
            let mut cfg = McConfig::new(
                ScenarioSpec::Censoring(CensoringScenario {
                    p: 10,
                    flavor: CensoringFlavor::Nonlinear,
                    ..Default::default()
                }),
                table1,
                500,
            );
            cfg.nuisance.outcome_features = quad;
            cfg.nuisance.propensity_features = squares;
            // 66 outcome coefficients against roughly as many labeled units per fold.
            cfg.nuisance.ridge = 1e-4;
            vec![cfg]
        }
        "nonlinear-casecontrol" => {
            let mut cfg = McConfig::new(
                ScenarioSpec::CaseControl(CaseControlScenario {
                    flavor: OutcomeFlavor::Nonlinear,
                    ..Default::default()
                }),
                table1,
                500,
            );
            cfg.nuisance.outcome_features = quad;
            vec![cfg]
        }
        "surfaceA" | "surfaceB" => {
            let surface = if name == "surfaceA" { Surface::A } else { Surface::B };
            let est: Vec<EstimatorSpec> = Method::ALL
                .iter()
                .map(|&m| EstimatorSpec::new(m, NuisanceSource::Estimated))
                .collect();
            [PuMode::Censoring { c: 0.1 }, PuMode::CaseControl { class_prior: 0.1 }]
                .into_iter()
                .map(|mode| {
                    let mut cfg = McConfig::new(
                        ScenarioSpec::SemiSynthetic(SemiSyntheticScenario {
                            surface,
                            mode,
                            covariates_csv: None,
                            schema: None,
                            design_seed: 0,
                        }),
                        est.clone(),
                        1000,
                    );
                    // Few labeled units for 26 coefficients: a small ridge keeps OLS solvable.
                    cfg.nuisance.ridge = 1e-4;
                    cfg
                })
                .collect()
        }
        other => {
            return invalid(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            ))
        }
    };
    Ok(cfgs)
}
