//! Data-generating processes with their true nuisance functions: synthetic
//! censoring and case-control designs, and semi-synthetic response surfaces
//! over an external covariate table.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::casecontrol::CaseControlData;
use crate::censoring::CensoringDataset;
use crate::error::{invalid, PuError, Result};
use crate::regression::Matrix;
use crate::stats::{derive_seed, mean, sigmoid};

const OUTCOME_INTERCEPT: f64 = 1.1;
/// Coefficients are drawn from N(0, 0.5) once per experiment.
const BETA_VARIANCE: f64 = 0.5;
const DESIGN_STREAM: u64 = 0xD5;

/// True nuisance functions of a censoring design.
pub trait CensoringTruth: Send + Sync {
    /// ℙ(D = 1 | X = x).
    fn p_treat(&self, x: &[f64]) -> f64;
    /// c = ℙ(O = 1 | D = 1).
    fn labeling_rate(&self) -> f64;
    /// E[Y(1) | X = x].
    fn mu_t(&self, x: &[f64]) -> f64;
    /// E[Y(0) | X = x].
    fn mu_c(&self, x: &[f64]) -> f64;

    /// π(1|x) = c·ℙ(D = 1|x).
    fn pi1(&self, x: &[f64]) -> f64 {
        self.labeling_rate() * self.p_treat(x)
    }

    /// g(1|x) = ℙ(D = 1 | x, O = 0) = (1 − c)κ(x) / (1 − cκ(x)).
    fn g1(&self, x: &[f64]) -> f64 {
        let c = self.labeling_rate();
        let k = self.p_treat(x);
        let num = (1.0 - c) * k;
        if num == 0.0 {
            0.0
        } else {
            num / (1.0 - c * k)
        }
    }

    /// ν(x) = E[Y | x, O = 0].
    fn nu(&self, x: &[f64]) -> f64 {
        let g1 = self.g1(x);
        g1 * self.mu_t(x) + (1.0 - g1) * self.mu_c(x)
    }
}

/// True nuisance functions of a case-control design.
pub trait CaseControlTruth: Send + Sync {
    /// e(1), the treated share of the unlabeled population.
    fn class_prior(&self) -> f64;
    /// e(1|x).
    fn e1(&self, x: &[f64]) -> f64;
    fn mu_t(&self, x: &[f64]) -> f64;
    fn mu_c(&self, x: &[f64]) -> f64;

    /// r(x) = e(1)/e(1|x).
    fn r(&self, x: &[f64]) -> f64 {
        self.class_prior() / self.e1(x)
    }

    /// μ_U(x) = e(1|x)μ_T(x) + e(0|x)μ_C(x).
    fn mu_u(&self, x: &[f64]) -> f64 {
        let e1 = self.e1(x);
        e1 * self.mu_t(x) + (1.0 - e1) * self.mu_c(x)
    }
}

/// Shape of the outcome regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeFlavor {
    /// Y(0) = xᵀβ + 1.1.
    #[default]
    Linear,
    /// Y(0) = (xᵀβ)² + 1.1.
    Nonlinear,
}

fn baseline(flavor: OutcomeFlavor, beta: &[f64], x: &[f64]) -> f64 {
    let lin: f64 = beta.iter().zip(x).map(|(b, x)| b * x).sum();
    match flavor {
        OutcomeFlavor::Linear => lin + OUTCOME_INTERCEPT,
        OutcomeFlavor::Nonlinear => lin * lin + OUTCOME_INTERCEPT,
    }
}

/// Treatment mechanism of the censoring design.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringFlavor {
    /// ℙ(D=1|x) = trunc(sigmoid(xᵀβ)); linear outcome.
    #[default]
    Linear,
    /// ℙ(D=1|x) = sigmoid(xᵀβ + (x²)ᵀβ₂), optionally truncated; quadratic outcome.
    Nonlinear,
    /// First covariate is a fair coin and D equals it; the remaining covariates
    /// are noise. ℙ(D=1|x) ∈ {0, 1}, so treated units are identifiable from x
    /// and the labeling constant is recoverable. Linear outcome.
    Separable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensoringScenario {
    pub p: usize,
    pub n: usize,
    pub tau0: f64,
    /// Labeling probability; drawn once from U(0, 1) with the design seed when absent.
    pub c: Option<f64>,
    /// Drawn from N(0, 0.5 I) with the design seed when absent.
    pub beta: Option<Vec<f64>>,
    /// Quadratic propensity coefficients (nonlinear flavor only).
    pub beta2: Option<Vec<f64>>,
    pub flavor: CensoringFlavor,
    /// Bounds applied to ℙ(D=1|x) for the linear and nonlinear flavors.
    pub trunc: Option<[f64; 2]>,
    pub noise_sd: f64,
    pub design_seed: u64,
}

impl Default for CensoringScenario {
    fn default() -> Self {
        Self {
            p: 3,
            n: 3000,
            tau0: 3.0,
            c: Some(0.25),
            beta: None,
            beta2: None,
            flavor: CensoringFlavor::Linear,
            trunc: Some([0.1, 0.9]),
            noise_sd: 1.0,
            design_seed: 0,
        }
    }
}

fn draw_coefficients(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, BETA_VARIANCE.sqrt()).expect("valid normal");
    (0..p).map(|_| normal.sample(rng)).collect()
}

fn check_vec(v: &Option<Vec<f64>>, p: usize, what: &str) -> Result<()> {
    if let Some(v) = v {
        if v.len() != p || v.iter().any(|x| !x.is_finite()) {
            return invalid(format!("{what} must have {p} finite entries"));
        }
    }
    Ok(())
}

impl CensoringScenario {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return invalid("censoring scenario needs p >= 1 and n >= 1");
        }
        if !self.tau0.is_finite() || !(self.noise_sd >= 0.0) {
            return invalid("tau0 must be finite and noise_sd non-negative");
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c <= 1.0) {
                return invalid(format!("labeling probability c must be in (0, 1], got {c}"));
            }
        }
        if let Some([lo, hi]) = self.trunc {
            if !(0.0 < lo && lo < hi && hi < 1.0) {
                return invalid("trunc bounds must satisfy 0 < lo < hi < 1");
            }
        }
        check_vec(&self.beta, self.p, "beta")?;
        check_vec(&self.beta2, self.p, "beta2")
    }

    /// Fixes every randomly drawn design parameter.
    pub fn resolve(&self) -> Result<CensoringModel> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.design_seed, DESIGN_STREAM, 0));
        let drawn_beta = draw_coefficients(&mut rng, self.p);
        let drawn_beta2 = draw_coefficients(&mut rng, self.p);
        let drawn_c: f64 = rng.random();
        Ok(CensoringModel {
            flavor: self.flavor,
            beta: self.beta.clone().unwrap_or(drawn_beta),
            beta2: match self.flavor {
                CensoringFlavor::Nonlinear => self.beta2.clone().unwrap_or(drawn_beta2),
                _ => vec![0.0; self.p],
            },
            c: self.c.unwrap_or(drawn_c),
            trunc: self.trunc,
            tau0: self.tau0,
            noise_sd: self.noise_sd,
        })
    }
}

/// A censoring design with all parameters fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensoringModel {
    pub flavor: CensoringFlavor,
    pub beta: Vec<f64>,
    pub beta2: Vec<f64>,
    pub c: f64,
    pub trunc: Option<[f64; 2]>,
    pub tau0: f64,
    pub noise_sd: f64,
}

impl CensoringModel {
    fn outcome_flavor(&self) -> OutcomeFlavor {
        match self.flavor {
            CensoringFlavor::Nonlinear => OutcomeFlavor::Nonlinear,
            _ => OutcomeFlavor::Linear,
        }
    }

    /// Draws a sample of size `n`.
    pub fn sample(&self, n: usize, seed: u64) -> CensoringDraw {
        let p = self.beta.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise_sd).expect("valid noise sd");
        let mut x = Matrix::zeros(n, p);
        let mut o = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut row = vec![0.0; p];
        for i in 0..n {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if j == 0 && self.flavor == CensoringFlavor::Separable {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    rng.sample(StandardNormal)
                };
                x[(i, j)] = *v;
            }
            let di = rng.random::<f64>() < self.p_treat(&row);
            let labeled = rng.random::<f64>() < self.c;
            let eps = noise.sample(&mut rng);
            let oi = di && labeled;
            let base = baseline(self.outcome_flavor(), &self.beta, &row);
            y.push(base + if di { self.tau0 } else { 0.0 } + eps);
            o.push(oi);
            d.push(di);
        }
        CensoringDraw {
            data: CensoringDataset { x, o, y },
            oracle: self.clone(),
            treatment: d,
        }
    }
}

impl CensoringTruth for CensoringModel {
    fn p_treat(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.beta.iter().zip(x).map(|(b, x)| b * x).sum();
        let p = match self.flavor {
            CensoringFlavor::Separable => return if x[0] > 0.5 { 1.0 } else { 0.0 },
            CensoringFlavor::Linear => sigmoid(lin),
            CensoringFlavor::Nonlinear => {
                let quad: f64 = self.beta2.iter().zip(x).map(|(b, x)| b * x * x).sum();
                sigmoid(lin + quad)
            }
        };
        match self.trunc {
            Some([lo, hi]) => p.clamp(lo, hi),
            None => p,
        }
    }

    fn labeling_rate(&self) -> f64 {
        self.c
    }

    fn mu_t(&self, x: &[f64]) -> f64 {
        self.mu_c(x) + self.tau0
    }

    fn mu_c(&self, x: &[f64]) -> f64 {
        baseline(self.outcome_flavor(), &self.beta, x)
    }
}

/// A generated censoring sample with its design and the hidden treatment.
#[derive(Clone, Debug)]
pub struct CensoringDraw {
    pub data: CensoringDataset,
    pub oracle: CensoringModel,
    /// Latent D, for diagnostics only.
    pub treatment: Vec<bool>,
}

/// Resolves the scenario and draws `sc.n` samples.
pub fn gen_censoring(sc: &CensoringScenario, seed: u64) -> Result<CensoringDraw> {
    Ok(sc.resolve()?.sample(sc.n, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseControlScenario {
    pub p: usize,
    pub mu_p: f64,
    pub mu_n: f64,
    pub class_prior: f64,
    pub tau0: f64,
    pub m: usize,
    pub l: usize,
    pub beta: Option<Vec<f64>>,
    pub flavor: OutcomeFlavor,
    pub noise_sd: f64,
    pub design_seed: u64,
}

impl Default for CaseControlScenario {
    fn default() -> Self {
        Self {
            p: 3,
            mu_p: 0.5,
            mu_n: 0.0,
            class_prior: 0.3,
            tau0: 3.0,
            m: 1000,
            l: 2000,
            beta: None,
            flavor: OutcomeFlavor::Linear,
            noise_sd: 1.0,
            design_seed: 0,
        }
    }
}

impl CaseControlScenario {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.m == 0 || self.l == 0 {
            return invalid("case-control scenario needs p, m, l >= 1");
        }
        if !(self.class_prior > 0.0 && self.class_prior < 1.0) {
            return invalid("class prior must be in (0, 1)");
        }
        if ![self.mu_p, self.mu_n, self.tau0].iter().all(|v| v.is_finite())
            || !(self.noise_sd >= 0.0)
        {
            return invalid("means and tau0 must be finite, noise_sd non-negative");
        }
        check_vec(&self.beta, self.p, "beta")
    }

    pub fn resolve(&self) -> Result<CaseControlModel> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.design_seed, DESIGN_STREAM, 1));
        let drawn = draw_coefficients(&mut rng, self.p);
        Ok(CaseControlModel {
            mu_p: self.mu_p,
            mu_n: self.mu_n,
            class_prior: self.class_prior,
            tau0: self.tau0,
            beta: self.beta.clone().unwrap_or(drawn),
            flavor: self.flavor,
            noise_sd: self.noise_sd,
        })
    }
}

/// Two-Gaussian case-control design with all parameters fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseControlModel {
    pub mu_p: f64,
    pub mu_n: f64,
    pub class_prior: f64,
    pub tau0: f64,
    pub beta: Vec<f64>,
    pub flavor: OutcomeFlavor,
    pub noise_sd: f64,
}

impl CaseControlModel {
    pub fn sample(&self, m: usize, l: usize, seed: u64) -> CaseControlDraw {
        let p = self.beta.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise_sd).expect("valid noise sd");
        let mut x_t = Matrix::zeros(m, p);
        let mut y_t = Vec::with_capacity(m);
        let mut row = vec![0.0; p];
        for j in 0..m {
            for (k, v) in row.iter_mut().enumerate() {
                *v = self.mu_p + rng.sample::<f64, _>(StandardNormal);
                x_t[(j, k)] = *v;
            }
            y_t.push(self.mu_t(&row) + noise.sample(&mut rng));
        }
        let mut x_u = Matrix::zeros(l, p);
        let mut y_u = Vec::with_capacity(l);
        let mut latent = Vec::with_capacity(l);
        for i in 0..l {
            let d = rng.random::<f64>() < self.class_prior;
            let center = if d { self.mu_p } else { self.mu_n };
            for (k, v) in row.iter_mut().enumerate() {
                *v = center + rng.sample::<f64, _>(StandardNormal);
                x_u[(i, k)] = *v;
            }
            let mu = if d { self.mu_t(&row) } else { self.mu_c(&row) };
            y_u.push(mu + noise.sample(&mut rng));
            latent.push(d);
        }
        CaseControlDraw {
            data: CaseControlData { x_t, y_t, x_u, y_u },
            oracle: self.clone(),
            latent_treatment: latent,
        }
    }
}

impl CaseControlTruth for CaseControlModel {
    fn class_prior(&self) -> f64 {
        self.class_prior
    }

    /// Bayes posterior of the treated component under the two-Gaussian mixture.
    fn e1(&self, x: &[f64]) -> f64 {
        let log_ratio: f64 = x
            .iter()
            .map(|v| 0.5 * ((v - self.mu_n).powi(2) - (v - self.mu_p).powi(2)))
            .sum();
        sigmoid((self.class_prior / (1.0 - self.class_prior)).ln() + log_ratio)
    }

    fn mu_t(&self, x: &[f64]) -> f64 {
        self.mu_c(x) + self.tau0
    }

    fn mu_c(&self, x: &[f64]) -> f64 {
        baseline(self.flavor, &self.beta, x)
    }
}

#[derive(Clone, Debug)]
pub struct CaseControlDraw {
    pub data: CaseControlData,
    pub oracle: CaseControlModel,
    /// Latent D of the unlabeled sample, for diagnostics only.
    pub latent_treatment: Vec<bool>,
}

pub fn gen_casecontrol(sc: &CaseControlScenario, seed: u64) -> Result<CaseControlDraw> {
    Ok(sc.resolve()?.sample(sc.m, sc.l, seed))
}

/// Column roles of a covariate CSV file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateSchema {
    pub continuous: Vec<String>,
    pub binary: Vec<String>,
    pub treatment: Option<String>,
    /// Z-score the continuous columns; binary columns are never rescaled.
    pub standardize: bool,
}

impl CovariateSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PuError::SchemaError(e.to_string()))
    }
}

/// Covariates (continuous columns first, then binary) and an optional treatment vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateTable {
    pub x: Matrix,
    pub names: Vec<String>,
    pub n_continuous: usize,
    pub treatment: Option<Vec<bool>>,
}

fn parse_binary(v: f64, name: &str, row: usize) -> Result<bool> {
    if v == 0.0 {
        Ok(false)
    } else if v == 1.0 {
        Ok(true)
    } else {
        Err(PuError::SchemaError(format!(
            "column {name} row {row}: expected 0 or 1, got {v}"
        )))
    }
}

/// Reads a headered CSV, picking and validating the columns named in `schema`.
pub fn load_covariates_csv(path: &Path, schema: &CovariateSchema) -> Result<CovariateTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_io)?;
    let headers = reader.headers().map_err(csv_io)?.clone();
    let find = |name: &String| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PuError::SchemaError(format!("column {name} not found")))
    };
    let names: Vec<String> = schema.continuous.iter().chain(&schema.binary).cloned().collect();
    if names.is_empty() {
        return Err(PuError::SchemaError("schema names no covariate columns".into()));
    }
    let cols = names.iter().map(find).collect::<Result<Vec<_>>>()?;
    let t_col = schema.treatment.as_ref().map(find).transpose()?;
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut treat = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| PuError::CsvError {
            row,
            col: 0,
            message: e.to_string(),
        })?;
        let cell = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PuError::CsvError {
                    row,
                    col: c + 1,
                    message: format!("cannot parse {s:?} as a number"),
                })
        };
        let mut vals = Vec::with_capacity(cols.len());
        for (k, &c) in cols.iter().enumerate() {
            let v = cell(c)?;
            if k >= schema.continuous.len() {
                parse_binary(v, &names[k], row)?;
            }
            vals.push(v);
        }
        if let Some(c) = t_col {
            treat.push(parse_binary(cell(c)?, "treatment", row)?);
        }
        values.push(vals);
    }
    let n = values.len();
    let mut x = Matrix::from_fn(n, names.len(), |i, j| values[i][j]);
    if schema.standardize {
        for j in 0..schema.continuous.len() {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let m = mean(&col);
            let sd = crate::stats::sample_variance(&col).sqrt();
            if sd > 0.0 {
                x.column_mut(j).apply(|v| *v = (*v - m) / sd);
            }
        }
    }
    Ok(CovariateTable {
        x,
        names,
        n_continuous: schema.continuous.len(),
        treatment: t_col.map(|_| treat),
    })
}

fn csv_io(e: csv::Error) -> PuError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => PuError::IoError(io),
        other => PuError::CsvError {
            row: 0,
            col: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Writes a covariate table (and treatment column `treat`, if any) as CSV.
pub fn write_covariates_csv(table: &CovariateTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = table.names.clone();
    if table.treatment.is_some() {
        header.push("treat".into());
    }
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..table.x.nrows() {
        let mut rec: Vec<String> = table.x.row(i).iter().map(|v| format!("{v:e}")).collect();
        if let Some(t) = &table.treatment {
            rec.push(if t[i] { "1" } else { "0" }.into());
        }
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Sample size, continuous and binary column counts of the stand-in table.
pub const STANDIN_SHAPE: (usize, usize, usize) = (747, 6, 19);

/// Synthetic covariate table shaped like the usual semi-synthetic benchmark:
/// 747 rows, 6 standard-normal and 19 binary columns, roughly 19% treated.
pub fn standin_covariates(seed: u64) -> CovariateTable {
    let (n, nc, nb) = STANDIN_SHAPE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates: Vec<f64> = (0..nb).map(|_| rng.random_range(0.1..0.9)).collect();
    let w: Vec<f64> = (0..nc + nb).map(|_| rng.random_range(-0.3..0.3)).collect();
    let mut x = Matrix::zeros(n, nc + nb);
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..nc {
            x[(i, j)] = rng.sample(StandardNormal);
        }
        for (j, rate) in rates.iter().enumerate() {
            x[(i, nc + j)] = if rng.random::<f64>() < *rate { 1.0 } else { 0.0 };
        }
        let centered: f64 = (0..nc + nb)
            .map(|j| w[j] * (x[(i, j)] - if j < nc { 0.0 } else { rates[j - nc] }))
            .sum();
        d.push(rng.random::<f64>() < sigmoid(-1.45 + centered));
    }
    let names = (0..nc)
        .map(|j| format!("x{}", j + 1))
        .chain((0..nb).map(|j| format!("b{}", j + 1)))
        .collect();
    CovariateTable {
        x,
        names,
        n_continuous: nc,
        treatment: Some(d),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surface {
    A,
    B,
}

/// A response surface with its coefficient vector fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSurfaceSpec {
    pub surface: Surface,
    pub gamma: Vec<f64>,
    /// Entry of the constant offset matrix W (surface B).
    pub offset: f64,
}

impl ResponseSurfaceSpec {
    /// Draws γ from the surface's discrete support.
    pub fn draw(surface: Surface, p: usize, seed: u64) -> Self {
        let (support, probs): (&[f64], &[f64]) = match surface {
            Surface::A => (&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.5, 0.2, 0.15, 0.1, 0.05]),
            Surface::B => (&[0.0, 0.1, 0.2, 0.3, 0.4], &[0.6, 0.1, 0.1, 0.1, 0.1]),
        };
        let dist = rand::distr::weighted::WeightedIndex::new(probs).expect("valid weights");
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, DESIGN_STREAM, 2));
        let gamma = (0..p).map(|_| support[dist.sample(&mut rng)]).collect();
        Self {
            surface,
            gamma,
            offset: 0.5,
        }
    }
}

/// Conditional potential-outcome means and the implied effects.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceTruth {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    /// Surface-B normalizer (zero for surface A).
    pub q: f64,
    pub ate: f64,
    pub att: f64,
}

fn dot_row(x: &Matrix, i: usize, g: &[f64], shift: f64) -> f64 {
    g.iter().enumerate().map(|(j, g)| g * (x[(i, j)] + shift)).sum()
}

/// Surface-B q making the treated-average effect equal to 4.
///
/// The condition mean_T[xᵀγ − q − exp((x + W)ᵀγ)] = 4 is linear in q.
pub fn surface_b_q(x: &Matrix, d: &[bool], gamma: &[f64], offset: f64) -> Result<f64> {
    let treated: Vec<usize> = (0..d.len()).filter(|&i| d[i]).collect();
    if treated.is_empty() {
        return Err(PuError::NoPositives("surface B needs treated units".into()));
    }
    let v: Vec<f64> = treated
        .iter()
        .map(|&i| dot_row(x, i, gamma, 0.0) - dot_row(x, i, gamma, offset).exp())
        .collect();
    Ok(mean(&v) - 4.0)
}

pub fn surface_means(spec: &ResponseSurfaceSpec, x: &Matrix, d: &[bool]) -> Result<SurfaceTruth> {
    if d.len() != x.nrows() {
        return invalid("treatment and covariates differ in length");
    }
    if spec.gamma.len() != x.ncols() {
        return invalid("gamma length does not match covariate dimension");
    }
    let n = x.nrows();
    let (mu0, mu1, q): (Vec<f64>, Vec<f64>, f64) = match spec.surface {
        Surface::A => {
            let m0: Vec<f64> = (0..n).map(|i| dot_row(x, i, &spec.gamma, 0.0)).collect();
            let m1 = m0.iter().map(|v| v + 4.0).collect();
            (m0, m1, 0.0)
        }
        Surface::B => {
            let q = surface_b_q(x, d, &spec.gamma, spec.offset)?;
            let m0 = (0..n)
                .map(|i| dot_row(x, i, &spec.gamma, spec.offset).exp())
                .collect();
            let m1 = (0..n).map(|i| dot_row(x, i, &spec.gamma, 0.0) - q).collect();
            (m0, m1, q)
        }
    };
    let effect: Vec<f64> = mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect();
    let treated: Vec<f64> = (0..n).filter(|&i| d[i]).map(|i| effect[i]).collect();
    Ok(SurfaceTruth {
        ate: mean(&effect),
        att: if treated.is_empty() { f64::NAN } else { mean(&treated) },
        mu0,
        mu1,
        q,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDraw {
    /// Observed outcome Y(D).
    pub y: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub truth: SurfaceTruth,
}

/// Draws both potential outcomes with unit-variance noise and reveals Y(D).
pub fn simulate_response_surface(
    spec: &ResponseSurfaceSpec,
    x: &Matrix,
    d: &[bool],
    seed: u64,
) -> Result<SurfaceDraw> {
    let truth = surface_means(spec, x, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.nrows();
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for i in 0..n {
        y0.push(truth.mu0[i] + rng.sample::<f64, _>(StandardNormal));
        y1.push(truth.mu1[i] + rng.sample::<f64, _>(StandardNormal));
    }
    let y = (0..n).map(|i| if d[i] { y1[i] } else { y0[i] }).collect();
    Ok(SurfaceDraw { y, y0, y1, truth })
}

/// How a fully observed sample is turned into PU observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", deny_unknown_fields)]
pub enum PuMode {
    /// Label each treated unit with probability `c`.
    Censoring { c: f64 },
    /// Split in half: treated units of the first half form the treated sample,
    /// the whole second half the unlabeled sample. The prior is an input.
    CaseControl { class_prior: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PuView {
    Censoring(CensoringDataset),
    CaseControl {
        data: CaseControlData,
        class_prior: f64,
    },
}

pub fn derive_pu_views(
    x: &Matrix,
    d: &[bool],
    y: &[f64],
    mode: PuMode,
    seed: u64,
) -> Result<PuView> {
    let n = x.nrows();
    if d.len() != n || y.len() != n {
        return invalid("covariates, treatment and outcome differ in length");
    }
    if !d.iter().any(|&v| v) {
        return Err(PuError::NoPositives("no treated units to label".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        PuMode::Censoring { c } => {
            if !(c > 0.0 && c <= 1.0) {
                return invalid("labeling probability must be in (0, 1]");
            }
            let o = d.iter().map(|&di| di && rng.random::<f64>() < c).collect();
            Ok(PuView::Censoring(CensoringDataset::new(x.clone(), o, y.to_vec())?))
        }
        PuMode::CaseControl { class_prior } => {
            if !(class_prior > 0.0 && class_prior < 1.0) {
                return invalid("class prior must be in (0, 1)");
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let (first, second) = idx.split_at(n / 2);
            let treated: Vec<usize> = first.iter().copied().filter(|&i| d[i]).collect();
            if treated.is_empty() {
                return Err(PuError::NoPositives("no treated units in the positive half".into()));
            }
            let data = CaseControlData::new(
                x.select_rows(&treated),
                treated.iter().map(|&i| y[i]).collect(),
                x.select_rows(second),
                second.iter().map(|&i| y[i]).collect(),
            )?;
            Ok(PuView::CaseControl { data, class_prior })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_one_means_unknown_group_is_controls() {
        let sc = CensoringScenario {
            c: Some(1.0),
            n: 500,
            ..Default::default()
        };
        let draw = gen_censoring(&sc, 4).unwrap();
        assert_eq!(draw.data.o, draw.treatment);
        assert_eq!(draw.oracle.g1(&[0.3, -1.0, 2.0]), 0.0);
    }

    #[test]
    fn truncation_bounds_hold() {
        let draw = gen_censoring(&CensoringScenario::default(), 1).unwrap();
        for i in 0..draw.data.len() {
            let k = draw.oracle.p_treat(&draw.data.row(i));
            assert!((0.1..=0.9).contains(&k));
        }
    }

    #[test]
    fn same_seed_same_data() {
        let sc = CensoringScenario::default();
        let a = gen_censoring(&sc, 9).unwrap();
        let b = gen_censoring(&sc, 9).unwrap();
        assert_eq!(a.data, b.data);
        let cc = CaseControlScenario::default();
        assert_eq!(gen_casecontrol(&cc, 2).unwrap().data, gen_casecontrol(&cc, 2).unwrap().data);
    }

    #[test]
    fn identical_components_give_flat_posterior() {
        let m = CaseControlScenario {
            mu_p: 0.2,
            mu_n: 0.2,
            ..Default::default()
        }
        .resolve()
        .unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 3.0]] {
            assert!((m.e1(&x) - 0.3).abs() < 1e-15);
            assert!((m.r(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_at_treated_mean_matches_hand_ratio() {
        let m = CaseControlScenario::default().resolve().unwrap();
        // At x = 0.5·1: log ζ_T/ζ_C = 3·(0.25/2) = 0.375.
        let ratio = 0.375f64.exp();
        let expect = 0.3 * ratio / (0.3 * ratio + 0.7);
        assert!((m.e1(&[0.5, 0.5, 0.5]) - expect).abs() < 1e-14);
    }

    #[test]
    fn mu_u_decomposition_is_exact() {
        let m = CaseControlScenario::default().resolve().unwrap();
        let x = [0.3, -0.1, 1.2];
        let e1 = m.e1(&x);
        assert_eq!(m.mu_u(&x), e1 * m.mu_t(&x) + (1.0 - e1) * m.mu_c(&x));
    }

    #[test]
    fn surface_a_effect_is_four() {
        let t = standin_covariates(1);
        let spec = ResponseSurfaceSpec::draw(Surface::A, 25, 3);
        let truth = surface_means(&spec, &t.x, t.treatment.as_ref().unwrap()).unwrap();
        assert!((truth.ate - 4.0).abs() < 1e-12);
        assert!((truth.att - 4.0).abs() < 1e-12);
    }

    #[test]
    fn surface_b_zero_gamma() {
        let t = standin_covariates(1);
        let spec = ResponseSurfaceSpec {
            surface: Surface::B,
            gamma: vec![0.0; 25],
            offset: 0.5,
        };
        let d = t.treatment.as_ref().unwrap();
        let truth = surface_means(&spec, &t.x, d).unwrap();
        // Y(0) mean exp(0) = 1 and Y(1) mean −q, so an ATT of 4 needs q = −5.
        assert_eq!(truth.q, -5.0);
        assert!(truth.mu0.iter().all(|&v| v == 1.0));
        assert!((truth.att - 4.0).abs() < 1e-12);
    }

    #[test]
    fn surface_b_q_solves_normalization_by_bisection() {
        let t = standin_covariates(2);
        let d = t.treatment.clone().unwrap();
        let spec = ResponseSurfaceSpec::draw(Surface::B, 25, 5);
        let q = surface_b_q(&t.x, &d, &spec.gamma, 0.5).unwrap();
        let att = |q: f64| {
            let s = ResponseSurfaceSpec { ..spec.clone() };
            let idx: Vec<usize> = (0..d.len()).filter(|&i| d[i]).collect();
            idx.iter()
                .map(|&i| dot_row(&t.x, i, &s.gamma, 0.0) - q - dot_row(&t.x, i, &s.gamma, 0.5).exp())
                .sum::<f64>()
                / idx.len() as f64
                - 4.0
        };
        let (mut lo, mut hi) = (-1e6, 1e6);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if att(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((q - 0.5 * (lo + hi)).abs() < 1e-8 * q.abs().max(1.0));
    }

    #[test]
    fn pu_views() {
        let x = Matrix::zeros(6, 1);
        let y = vec![1.0; 6];
        assert!(matches!(
            derive_pu_views(&x, &[false; 6], &y, PuMode::Censoring { c: 0.5 }, 0),
            Err(PuError::NoPositives(_))
        ));
        let d = [true, false, true, false, true, true];
        match derive_pu_views(&x, &d, &y, PuMode::Censoring { c: 1.0 }, 0).unwrap() {
            PuView::Censoring(ds) => assert_eq!(ds.o, d.to_vec()),
            _ => unreachable!(),
        }
    }
}
