//! `puate`: simulate PU datasets, estimate the ATE from CSV files and run
//! Monte Carlo experiments.

mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use puate::casecontrol::{estimate_casecontrol, CaseControlData, CcNuisanceTable};
use puate::censoring::{estimate_censoring, CensNuisanceTable, CensoringDataset};
use puate::crossfit::{
    fit_global_e, fit_nuisances_casecontrol, fit_nuisances_censoring, make_folds, ESource,
    GSource, NuisanceOptions,
};
use puate::dgp::{
    derive_pu_views, load_covariates_csv, simulate_response_surface, standin_covariates,
    CaseControlTruth, CensoringTruth, PuView, ResponseSurfaceSpec,
};
use puate::montecarlo::{
    export_results, preset, run_trials, summarize_table, EstimatorSpec, ExportFormat, McConfig,
    NuisanceSource, ScenarioSpec, PRESETS,
};
use puate::pu_nuisance::fit_censoring_propensity_from_aux;
use puate::stats::derive_seed;
use puate::{EstimateReport, Method, PuError};

use table::{flags, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn config(e: PuError) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime(e: PuError) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "puate", version, about = "ATE estimation from positive and unlabeled data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset from a scenario and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the ATE from CSV data.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment and print MSE, bias and coverage.
    Mc(McArgs),
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in experiment configuration.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the censoring sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write the true nuisance values of every row.
    #[arg(long)]
    with_oracle: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Ipw,
    Dm,
    #[value(alias = "efficient")]
    Eff,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Ipw => vec![Method::Ipw],
            MethodArg::Dm => vec![Method::Dm],
            MethodArg::Eff => vec![Method::Efficient],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GArg {
    True,
    Plugin,
    Aux,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EArg {
    True,
    Plugin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum NuisanceMode {
    /// Cross-fit the nuisances.
    Fit,
    /// Use the true nuisance columns in the input files.
    Oracle,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Censoring data: covariates plus `o` and `y` columns.
    #[arg(long, conflicts_with_all = ["treated", "unlabeled"])]
    data: Option<PathBuf>,
    /// Case-control treated sample: covariates plus `y`.
    #[arg(long, requires_all = ["unlabeled", "class_prior"])]
    treated: Option<PathBuf>,
    /// Case-control unlabeled sample: covariates plus `y`.
    #[arg(long, requires = "treated")]
    unlabeled: Option<PathBuf>,
    #[arg(long)]
    class_prior: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = NuisanceMode::Fit)]
    nuisances: NuisanceMode,
    /// Source of g in the censoring design (`true` reads the `g1` column).
    #[arg(long, value_enum, default_value_t = GArg::Plugin)]
    g: GArg,
    /// Auxiliary censoring sample for `--g aux`.
    #[arg(long)]
    aux: Option<PathBuf>,
    /// Source of e in the case-control design (`true` reads the `e1` columns).
    #[arg(long, value_enum, default_value_t = EArg::Plugin)]
    e: EArg,
    #[arg(long, default_value_t = 2)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    clip_eps: Option<f64>,
    /// Write the full reports as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    source: ScenarioArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    clip_eps: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Restrict the estimators to one method.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Use this g source for every method (censoring).
    #[arg(long, value_enum, conflicts_with = "e")]
    g: Option<GArg>,
    /// Use this e source for every method (case-control).
    #[arg(long, value_enum)]
    e: Option<EArg>,
    /// Per-trial CSV, or the full summary when the extension is `.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_scenario_file(path: &Path) -> Result<McConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn load_configs(args: &ScenarioArgs) -> Result<Vec<McConfig>, CliError> {
    match (&args.scenario, &args.preset) {
        (Some(path), _) => Ok(vec![load_scenario_file(path)?]),
        (None, Some(name)) => preset(name).map_err(config),
        (None, None) => Err(CliError::Config(format!(
            "pass --scenario FILE or --preset NAME ({})",
            PRESETS.join(", ")
        ))),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_configs(&args.source)?.remove(0);
    create_dir(&args.out)?;
    let seed = args.seed;
    if args.n.is_some() && !matches!(cfg.scenario, ScenarioSpec::Censoring(_)) {
        return Err(CliError::Config("--n applies to censoring scenarios only".into()));
    }
    match &cfg.scenario {
        ScenarioSpec::Censoring(sc) => {
            let mut sc = sc.clone();
            if let Some(n) = args.n {
                sc.n = n;
            }
            let model = sc.resolve().map_err(config)?;
            let draw = model.sample(sc.n, seed);
            let mut t = Table::new();
            t.push_matrix(&draw.data.x, "x");
            t.push("o", flags(&draw.data.o));
            t.push("y", draw.data.y.clone());
            if args.with_oracle {
                let rows: Vec<Vec<f64>> = (0..sc.n).map(|i| draw.data.row(i)).collect();
                let eval = |f: &dyn Fn(&[f64]) -> f64| rows.iter().map(|x| f(x)).collect();
                t.push("d", flags(&draw.treatment));
                t.push("mu_t", eval(&|x| model.mu_t(x)));
                t.push("nu", eval(&|x| model.nu(x)));
                t.push("pi1", eval(&|x| model.pi1(x)));
                t.push("g1", eval(&|x| model.g1(x)));
            }
            let path = args.out.join("censoring.csv");
            t.write(&path)?;
            println!("wrote {} rows to {}", sc.n, path.display());
        }
        ScenarioSpec::CaseControl(sc) => {
            let model = sc.resolve().map_err(config)?;
            let draw = model.sample(sc.m, sc.l, seed);
            let data = &draw.data;
            let mut tt = Table::new();
            tt.push_matrix(&data.x_t, "x");
            tt.push("y", data.y_t.clone());
            let mut tu = Table::new();
            tu.push_matrix(&data.x_u, "x");
            tu.push("y", data.y_u.clone());
            if args.with_oracle {
                let rows = |x: &puate::regression::Matrix| -> Vec<Vec<f64>> {
                    x.row_iter().map(|r| r.iter().copied().collect()).collect()
                };
                let (rt, ru) = (rows(&data.x_t), rows(&data.x_u));
                let eval = |rs: &[Vec<f64>], f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
                    rs.iter().map(|x| f(x)).collect()
                };
                tt.push("mu_t", eval(&rt, &|x| model.mu_t(x)));
                tt.push("e1", eval(&rt, &|x| model.e1(x)));
                tu.push("d", flags(&draw.latent_treatment));
                tu.push("mu_t", eval(&ru, &|x| model.mu_t(x)));
                tu.push("mu_u", eval(&ru, &|x| model.mu_u(x)));
                tu.push("e1", eval(&ru, &|x| model.e1(x)));
            }
            write_casecontrol(&args.out, &tt, &tu, model.class_prior)?;
        }
        ScenarioSpec::SemiSynthetic(sc) => {
            if args.with_oracle {
                return Err(CliError::Config(
                    "--with-oracle is not available for semi-synthetic scenarios".into(),
                ));
            }
            let table = match &sc.covariates_csv {
                Some(path) => {
                    let schema = sc.schema.clone().ok_or_else(|| {
                        CliError::Config("covariates_csv given without a schema".into())
                    })?;
                    load_covariates_csv(path, &schema).map_err(config)?
                }
                None => standin_covariates(sc.design_seed),
            };
            let d = table
                .treatment
                .clone()
                .ok_or_else(|| CliError::Config("covariates need a treatment column".into()))?;
            let spec = ResponseSurfaceSpec::draw(sc.surface, table.x.ncols(), sc.design_seed);
            let draw = simulate_response_surface(&spec, &table.x, &d, derive_seed(seed, 0, 0))
                .map_err(runtime)?;
            let view = derive_pu_views(&table.x, &d, &draw.y, sc.mode, derive_seed(seed, 3, 0))
                .map_err(runtime)?;
            match view {
                PuView::Censoring(data) => {
                    let mut t = Table::new();
                    t.push_matrix(&data.x, "x");
                    t.push("o", flags(&data.o));
                    t.push("y", data.y.clone());
                    let path = args.out.join("censoring.csv");
                    t.write(&path)?;
                    println!("wrote {} rows to {}", data.len(), path.display());
                }
                PuView::CaseControl { data, class_prior } => {
                    let mut tt = Table::new();
                    tt.push_matrix(&data.x_t, "x");
                    tt.push("y", data.y_t.clone());
                    let mut tu = Table::new();
                    tu.push_matrix(&data.x_u, "x");
                    tu.push("y", data.y_u.clone());
                    write_casecontrol(&args.out, &tt, &tu, class_prior)?;
                }
            }
            println!("true ATE {:.6}", draw.truth.ate);
        }
    }
    Ok(())
}

fn write_casecontrol(dir: &Path, tt: &Table, tu: &Table, class_prior: f64) -> Result<(), CliError> {
    let pt = dir.join("treated.csv");
    let pu = dir.join("unlabeled.csv");
    tt.write(&pt)?;
    tu.write(&pu)?;
    println!(
        "wrote {} treated rows to {} and {} unlabeled rows to {} (class prior {class_prior})",
        tt.nrows(),
        pt.display(),
        tu.nrows(),
        pu.display()
    );
    Ok(())
}

fn nuisance_options(clip_eps: Option<f64>) -> Result<NuisanceOptions, CliError> {
    let mut opts = NuisanceOptions::default();
    if let Some(eps) = clip_eps {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(CliError::Config(format!("--clip-eps must be in (0, 0.5), got {eps}")));
        }
        opts.clip_eps = eps;
    }
    Ok(opts)
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Config(format!("--level must be in (0, 1), got {}", args.level)));
    }
    if !(2..=10).contains(&args.folds) {
        return Err(CliError::Config(format!("--folds must be in 2..=10, got {}", args.folds)));
    }
    let opts = nuisance_options(args.clip_eps)?;
    let methods = args.method.methods();
    let reports: Vec<EstimateReport> = if let Some(path) = &args.data {
        estimate_censoring_file(&args, path, &opts, &methods)?
    } else if let (Some(pt), Some(pu)) = (&args.treated, &args.unlabeled) {
        estimate_casecontrol_files(&args, pt, pu, &opts, &methods)?
    } else {
        return Err(CliError::Config(
            "pass --data FILE (censoring) or --treated/--unlabeled/--class-prior (case-control)"
                .into(),
        ));
    };
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>10} {:>6}",
        "method", "tau_hat", "se", "ci_lo", "ci_hi", "clips"
    );
    for r in &reports {
        println!(
            "{:<10} {:>10.3} {:>10.4} {:>10.3} {:>10.3} {:>6}{}",
            r.method.label(),
            r.tau_hat,
            r.se,
            r.ci_lo,
            r.ci_hi,
            r.clip_count,
            if r.naive_ci { "  (naive CI)" } else { "" }
        );
    }
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&reports)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(out, text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}

fn estimate_censoring_file(
    args: &EstimateArgs,
    path: &Path,
    opts: &NuisanceOptions,
    methods: &[Method],
) -> Result<Vec<EstimateReport>, CliError> {
    let t = Table::read(path)?;
    let data = CensoringDataset::new(
        t.covariates(path)?,
        t.bools("o", path)?,
        t.require("y", path)?.to_vec(),
    )
    .map_err(config)?;
    let table = match args.nuisances {
        NuisanceMode::Oracle => {
            let col = |n: &str| t.require(n, path).map(<[f64]>::to_vec);
            CensNuisanceTable::from_values(
                col("mu_t")?,
                col("nu")?,
                col("pi1")?,
                col("g1")?,
                opts.clip_eps,
            )
            .map_err(config)?
        }
        NuisanceMode::Fit => {
            let g = match args.g {
                GArg::Plugin => GSource::PluginPerFold,
                GArg::True => GSource::Values(Arc::new(t.require("g1", path)?.to_vec())),
                GArg::Aux => {
                    let aux_path = args
                        .aux
                        .as_ref()
                        .ok_or_else(|| CliError::Config("--g aux needs --aux FILE".into()))?;
                    let aux = Table::read(aux_path)?;
                    let cp = fit_censoring_propensity_from_aux(
                        &aux.covariates(aux_path)?,
                        &aux.bools("o", aux_path)?,
                        opts.propensity_features,
                        opts.clip_eps,
                    )
                    .map_err(runtime)?;
                    GSource::Auxiliary(cp)
                }
            };
            let folds =
                make_folds(data.len(), args.folds, derive_seed(args.seed, 1, 0)).map_err(config)?;
            fit_nuisances_censoring(&data, &folds, g, opts)
                .and_then(|f| f.evaluate(&data))
                .map_err(runtime)?
        }
    };
    methods
        .iter()
        .map(|&m| estimate_censoring(m, &data, &table, args.level).map_err(runtime))
        .collect()
}

fn estimate_casecontrol_files(
    args: &EstimateArgs,
    pt: &Path,
    pu: &Path,
    opts: &NuisanceOptions,
    methods: &[Method],
) -> Result<Vec<EstimateReport>, CliError> {
    let prior = args
        .class_prior
        .ok_or_else(|| CliError::Config("case-control estimation needs --class-prior".into()))?;
    if !(prior > 0.0 && prior < 1.0) {
        return Err(CliError::Config(format!("--class-prior must be in (0, 1), got {prior}")));
    }
    let tt = Table::read(pt)?;
    let tu = Table::read(pu)?;
    let data = CaseControlData::new(
        tt.covariates(pt)?,
        tt.require("y", pt)?.to_vec(),
        tu.covariates(pu)?,
        tu.require("y", pu)?.to_vec(),
    )
    .map_err(config)?;
    let table = match args.nuisances {
        NuisanceMode::Oracle => CcNuisanceTable::from_values(
            tt.require("mu_t", pt)?.to_vec(),
            tt.require("e1", pt)?.to_vec(),
            tu.require("mu_t", pu)?.to_vec(),
            tu.require("mu_u", pu)?.to_vec(),
            tu.require("e1", pu)?.to_vec(),
            prior,
            opts.clip_eps,
        )
        .map_err(config)?,
        NuisanceMode::Fit => {
            let e = match args.e {
                EArg::Plugin => fit_global_e(&data, prior, opts).map_err(runtime)?,
                EArg::True => ESource::Values {
                    class_prior: prior,
                    treated: Arc::new(tt.require("e1", pt)?.to_vec()),
                    unlabeled: Arc::new(tu.require("e1", pu)?.to_vec()),
                },
            };
            fit_nuisances_casecontrol(&data, args.folds, derive_seed(args.seed, 1, 0), e, opts)
                .and_then(|f| f.evaluate(&data))
                .map_err(runtime)?
        }
    };
    methods
        .iter()
        .map(|&m| {
            estimate_casecontrol(m, &data, &table, Default::default(), args.level).map_err(runtime)
        })
        .collect()
}

fn apply_overrides(cfg: &mut McConfig, args: &McArgs) -> Result<(), CliError> {
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(l) = args.level {
        cfg.level = l;
    }
    if let Some(f) = args.folds {
        cfg.folds = f;
    }
    if let Some(eps) = args.clip_eps {
        cfg.nuisance.clip_eps = nuisance_options(Some(eps))?.clip_eps;
    }
    let censoring = cfg.scenario.is_censoring();
    if args.g.is_some() && !censoring {
        return Err(CliError::Config("--g applies to censoring scenarios; use --e".into()));
    }
    if args.e.is_some() && censoring {
        return Err(CliError::Config("--e applies to case-control scenarios; use --g".into()));
    }
    let source = match (args.g, args.e) {
        (Some(GArg::True), _) | (_, Some(EArg::True)) => Some(NuisanceSource::TruePropensity),
        (Some(GArg::Plugin), _) | (_, Some(EArg::Plugin)) => Some(NuisanceSource::Estimated),
        (Some(GArg::Aux), _) => Some(NuisanceSource::Auxiliary),
        (None, None) => None,
    };
    if let Some(src) = source {
        cfg.estimators = Method::ALL
            .iter()
            .map(|&m| EstimatorSpec::new(m, src))
            .collect();
    }
    if let Some(m) = args.method {
        let keep = m.methods();
        cfg.estimators.retain(|e| keep.contains(&e.method));
    }
    cfg.validate().map_err(config)
}

fn setting_name(cfg: &McConfig) -> &'static str {
    if cfg.scenario.is_censoring() {
        "censoring"
    } else {
        "casecontrol"
    }
}

fn export_path(out: &Path, cfg: &McConfig, multiple: bool) -> PathBuf {
    if !multiple {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{}.{}", setting_name(cfg), ext.to_string_lossy()),
        None => format!("{stem}-{}", setting_name(cfg)),
    };
    out.with_file_name(name)
}

fn cmd_mc(args: McArgs) -> Result<(), CliError> {
    let mut cfgs = load_configs(&args.source)?;
    for cfg in &mut cfgs {
        apply_overrides(cfg, &args)?;
    }
    let multiple = cfgs.len() > 1;
    for cfg in &cfgs {
        let summary = run_trials(cfg).map_err(runtime)?;
        println!(
            "{} design: {} trials, true ATE {:.4}, failed estimates {}",
            setting_name(cfg),
            cfg.trials,
            summary.tau0,
            summary.failures.len()
        );
        print!("{}", summarize_table(&summary.estimators, cfg.scenario.is_censoring()));
        if let Some(out) = &args.out {
            let path = export_path(out, cfg, multiple);
            let format = if path.extension().is_some_and(|e| e == "json") {
                ExportFormat::Json
            } else {
                ExportFormat::Csv
            };
            export_results(&summary, format, &path).map_err(runtime)?;
            println!("wrote {}", path.display());
        }
        if multiple {
            println!();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Mc(a) => cmd_mc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
