use agop_ixg::attribution::MethodKind;
use agop_ixg::experiment::{
    emit_report, run_roar_experiment, run_synthetic_benchmark, DatasetId, ExperimentConfig, ModelCache, Report, ReportFormat,
};
use agop_ixg::metrics::read_ledger;

fn small_synthetic() -> ExperimentConfig {
    let mut c = ExperimentConfig::synthetic();
    c.datasets = vec![DatasetId::Sparse, DatasetId::Interaction];
    c.methods = vec![MethodKind::AgopIxg, MethodKind::InputXGradient];
    c.seeds = vec![0];
    c.train.epochs = 4;
    c
}

#[test]
fn synthetic_benchmark_end_to_end() {
    let config = small_synthetic();
    let results = run_synthetic_benchmark(&config, &mut ModelCache::in_memory()).unwrap();
    assert!(results.all_succeeded());
    assert_eq!(results.cells.len(), 4);
    assert_eq!(results.table.len(), 4);
    assert_eq!(results.models.len(), 2);
    for d in ["sparse", "interaction"] {
        let rows: Vec<_> = results.table.iter().filter(|r| r.dataset == d).collect();
        assert_eq!(rows.iter().filter(|r| r.best_spearman).count(), 1);
        assert_eq!(rows.iter().filter(|r| r.best_noise_mass).count(), 1);
        assert!(results.model(d, 0).unwrap().agop_rank.is_some());
    }

    let dir = tempfile::tempdir().unwrap();
    results.write(&config, dir.path()).unwrap();
    results.write(&config, dir.path()).unwrap();
    let ledger = read_ledger(dir.path().join("metrics_ledger.csv")).unwrap();
    assert_eq!(ledger.len(), 8, "ledger is appended to");
    let reloaded = ExperimentConfig::load(dir.path().join("config.toml")).unwrap();
    assert_eq!(reloaded, config);
}

#[test]
fn disk_cache_skips_retraining() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_synthetic();
    let mut first = ModelCache::on_disk(dir.path());
    let a = run_synthetic_benchmark(&config, &mut first).unwrap();
    assert_eq!((first.hits(), first.misses()), (0, 2));
    let mut second = ModelCache::on_disk(dir.path());
    let b = run_synthetic_benchmark(&config, &mut second).unwrap();
    assert_eq!((second.hits(), second.misses()), (2, 0));
    assert_eq!(a.cells, b.cells);
}

#[test]
fn roar_on_synthetic_data() {
    let mut config = ExperimentConfig::roar();
    config.datasets = vec![DatasetId::Linear];
    config.methods = vec![MethodKind::AgopIxg];
    config.seeds = vec![0];
    config.train.epochs = 3;
    config.roar.fractions = vec![0.0, 0.25, 0.5];
    config.roar.include_ground_truth = true;
    config.roar.include_random = true;
    let results = run_roar_experiment(&config, &mut ModelCache::in_memory()).unwrap();
    assert!(results.all_succeeded());
    assert_eq!(results.curves.len(), 3);
    assert_eq!(results.auc_table.iter().filter(|r| r.best).count(), 1);
    let gt = results.curve("linear", "ground_truth").unwrap();
    assert_eq!(gt.masked_features, vec![0, 5, 10]);

    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&results.report(), ReportFormat::Csv, dir.path()).unwrap();
    assert_eq!(written.len(), 2);
    assert!(emit_report(&Report::Roar { curves: vec![] }, ReportFormat::Json, dir.path().join("x")).is_err());
}
