use puate::dgp::{CaseControlScenario, CensoringScenario};
use puate::montecarlo::{
    export_results, preset, read_records_csv, run_trials, summarize_table, EstimatorSpec,
    ExportFormat, McConfig, McSummary, NuisanceSource, ScenarioSpec,
};
use puate::Method;

fn small_censoring(trials: usize) -> McConfig {
    let scenario = ScenarioSpec::Censoring(CensoringScenario {
        n: 400,
        ..Default::default()
    });
    let estimators = [NuisanceSource::Estimated, NuisanceSource::TruePropensity, NuisanceSource::Oracle]
        .into_iter()
        .flat_map(|s| Method::ALL.map(|m| EstimatorSpec::new(m, s)))
        .collect();
    McConfig::new(scenario, estimators, trials)
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let mut cfg = small_censoring(6);
    cfg.workers = 1;
    let one = run_trials(&cfg).unwrap();
    cfg.workers = 3;
    let three = run_trials(&cfg).unwrap();
    assert_eq!(one.records, three.records);
    assert_eq!(one.estimators, three.estimators);
}

#[test]
fn base_seed_changes_the_draws() {
    let mut cfg = small_censoring(2);
    let a = run_trials(&cfg).unwrap();
    cfg.base_seed = 2;
    let b = run_trials(&cfg).unwrap();
    assert_ne!(a.records, b.records);
}

#[test]
fn summary_statistics_are_consistent() {
    let s = run_trials(&small_censoring(8)).unwrap();
    assert_eq!(s.records.len(), 8 * 9);
    for e in &s.estimators {
        assert_eq!(e.tau_hats.len() + e.failed, 8);
        assert!((e.mse - (e.bias * e.bias + e.variance)).abs() <= 1e-9 * (1.0 + e.mse));
        assert!((0.0..=1.0).contains(&e.coverage));
        assert_eq!(e.histogram.counts.iter().sum::<usize>(), e.tau_hats.len());
    }
    let oracle = s.get(Method::Efficient, NuisanceSource::Oracle).unwrap();
    assert_eq!(oracle.mean_clip_count, 0.0);
}

#[test]
fn exports_round_trip() {
    let s = run_trials(&small_censoring(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    export_results(&s, ExportFormat::Csv, &csv).unwrap();
    assert_eq!(read_records_csv(&csv).unwrap(), s.records);
    let json = dir.path().join("r.json");
    export_results(&s, ExportFormat::Json, &json).unwrap();
    let back: McSummary = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn failed_trials_are_counted_not_fatal() {
    // Ten samples cannot support an outcome regression on both folds.
    let cfg = McConfig::new(
        ScenarioSpec::Censoring(CensoringScenario {
            n: 10,
            ..Default::default()
        }),
        vec![EstimatorSpec::new(Method::Efficient, NuisanceSource::Estimated)],
        4,
    );
    let s = run_trials(&cfg).unwrap();
    let e = &s.estimators[0];
    assert_eq!(e.failed, s.failures.len());
    assert!(e.failed > 0);
    assert_eq!(e.failed + e.tau_hats.len(), 4);
}

#[test]
fn auxiliary_source_runs_in_censoring_only() {
    let mut cfg = small_censoring(2);
    cfg.aux_n = 2000;
    cfg.estimators = vec![EstimatorSpec::new(Method::Efficient, NuisanceSource::Auxiliary)];
    let s = run_trials(&cfg).unwrap();
    assert_eq!(s.estimators[0].tau_hats.len(), 2);

    cfg.scenario = ScenarioSpec::CaseControl(CaseControlScenario::default());
    assert!(cfg.validate().is_err());
}

#[test]
fn table_groups_columns_by_source() {
    let s = run_trials(&small_censoring(2)).unwrap();
    let t = summarize_table(&s.estimators, true);
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines.len(), 5);
    for label in ["estimated g", "true g", "oracle"] {
        assert!(lines[0].contains(label), "{t}");
    }
    assert_eq!(lines[1].matches("Efficient").count(), 3);
    assert!(lines[2].starts_with("MSE"));
    assert!(lines[3].starts_with("Bias"));
    assert!(lines[4].starts_with("Cov. ratio"));
}

#[test]
fn presets_cover_both_designs() {
    let cfgs = preset("surfaceA").unwrap();
    assert_eq!(cfgs.len(), 2);
    assert!(cfgs[0].scenario.is_censoring());
    assert!(!cfgs[1].scenario.is_censoring());
    assert!(preset("table2").is_err());
}
