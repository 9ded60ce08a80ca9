use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mixedbo::bo_engine::Strategy;
use mixedbo::harness::{
    emit_outputs, read_history, read_records, run_experiment, summarize, CsvRecord, ExperimentConfig, ObjectiveSource,
    StrategyKind,
};
use mixedbo::synthetic::Layout;

fn small_experiment() -> (ExperimentConfig, mixedbo::harness::ExperimentOutcome) {
    let mut cfg = ExperimentConfig::new(
        ObjectiveSource::Layout(Layout::TwoDCategorical),
        vec![StrategyKind::Gp(Strategy::Proposed), StrategyKind::Tpe, StrategyKind::Random],
    );
    cfg.iterations = 4;
    cfg.repetitions = 2;
    cfg.noise_variance = 0.01;
    cfg.bootstrap_samples = 20;
    cfg.seed = 3;
    cfg.engine.hyper_samples = 2;
    cfg.engine.budget.n_random = 100;
    let out = run_experiment(&cfg).unwrap();
    (cfg, out)
}

#[test]
fn outputs_round_trip_and_shapes() {
    let (cfg, out) = small_experiment();
    assert!(out.failures.is_empty());
    assert_eq!(out.records.len(), cfg.strategies.len() * cfg.repetitions * cfg.iterations);

    let summary = summarize(&out.records, cfg.bootstrap_samples, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_outputs(&summary, &out.records, dir.path()).unwrap();
    assert_eq!(paths.len(), 3);

    let back = read_records(&dir.path().join("records.csv")).unwrap();
    let expected: Vec<CsvRecord> = out.records.iter().map(CsvRecord::from).collect();
    assert_eq!(back, expected);

    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["strategy", "iteration", "mean_log10_regret", "bootstrap_std"]
    );
    assert_eq!(rows.records().count(), cfg.strategies.len() * cfg.iterations);

    let svg = std::fs::read_to_string(dir.path().join("regret.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, cfg.strategies.len());

    let history = read_history(&dir.path().join("records.csv")).unwrap();
    assert_eq!(history.len(), out.records.len());
    for ((c, y), r) in history.iter().zip(&out.records) {
        assert_eq!(c, &r.eval_config);
        assert_eq!(*y, r.observed_y);
    }
}

#[test]
fn regret_is_nonnegative_and_recommendations_valid() {
    let (cfg, out) = small_experiment();
    let space = cfg.source.space();
    for r in &out.records {
        assert!(r.regret.unwrap() >= 0.0);
        assert!(space.encode(&r.recommendation).is_ok());
        assert!(space.encode(&r.eval_config).is_ok());
    }
}

#[test]
fn experiments_are_reproducible() {
    let (_, a) = small_experiment();
    let (_, b) = small_experiment();
    assert_eq!(a.records, b.records);
}
