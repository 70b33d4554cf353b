use super::report::{aggregate_table, TableRow, TimingRow};
use super::{splits_for, ExperimentConfig, ModelCache};
use crate::attribution::{Explainer, MethodKind};
use crate::error::Result;
use crate::metrics::{evaluate_method, MetricsReport};
use serde::{Deserialize, Serialize};

/// Metrics of one `(dataset, method, seed)` cell without its timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub spearman_mean: Option<f64>,
    pub spearman_std_across_samples: Option<f64>,
    pub topk_precision: Option<f64>,
    pub noise_mass: Option<f64>,
    pub n_evaluated: usize,
    pub n_excluded_misclassified: usize,
    pub n_excluded_degenerate: usize,
    pub n_excluded_flagged: usize,
    pub n_spearman_undefined: usize,
    pub error: Option<String>,
}

impl CellRecord {
    fn ok(r: &MetricsReport) -> Self {
        Self {
            dataset: r.dataset.clone(),
            method: r.method.clone(),
            seed: r.seed,
            spearman_mean: Some(r.spearman_mean).filter(|v| v.is_finite()),
            spearman_std_across_samples: Some(r.spearman_std_across_samples).filter(|v| v.is_finite()),
            topk_precision: Some(r.topk_precision),
            noise_mass: Some(r.noise_mass),
            n_evaluated: r.n_evaluated,
            n_excluded_misclassified: r.n_excluded_misclassified,
            n_excluded_degenerate: r.n_excluded_degenerate,
            n_excluded_flagged: r.n_excluded_flagged,
            n_spearman_undefined: r.n_spearman_undefined,
            error: None,
        }
    }

    fn failed(dataset: &str, method: MethodKind, seed: u64, error: String) -> Self {
        Self {
            dataset: dataset.into(),
            method: method.id().into(),
            seed,
            spearman_mean: None,
            spearman_std_across_samples: None,
            topk_precision: None,
            noise_mass: None,
            n_evaluated: 0,
            n_excluded_misclassified: 0,
            n_excluded_degenerate: 0,
            n_excluded_flagged: 0,
            n_spearman_undefined: 0,
            error: Some(error),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// The trained model behind one `(dataset, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub dataset: String,
    pub seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub mean_confidence: f64,
    pub confidence_correct: f64,
    pub confidence_wrong: f64,
    pub label_flip_rate: Option<f64>,
    /// Retained AGOP rank, when AGOP-IxG was run.
    pub agop_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticResults {
    pub cells: Vec<CellRecord>,
    pub models: Vec<ModelSummary>,
    pub table: Vec<TableRow>,
    pub timings: Vec<TimingRow>,
    /// Full metric reports including wall time, in cell order.
    pub reports: Vec<MetricsReport>,
}

impl SyntheticResults {
    pub fn all_succeeded(&self) -> bool {
        self.cells.iter().all(CellRecord::succeeded)
    }

    pub fn cell(&self, dataset: &str, method: MethodKind, seed: u64) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.dataset == dataset && c.method == method.id() && c.seed == seed)
    }

    pub fn row(&self, dataset: &str, method: MethodKind) -> Option<&TableRow> {
        self.table.iter().find(|r| r.dataset == dataset && r.method == method.id())
    }

    pub fn model(&self, dataset: &str, seed: u64) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.dataset == dataset && m.seed == seed)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs every `(dataset, seed, method)` cell. A failing cell is recorded and
/// the run moves on.
pub fn run_synthetic_benchmark(config: &ExperimentConfig, cache: &mut ModelCache) -> Result<SyntheticResults> {
    config.validate()?;
    let train_cfg = config.effective_train();
    let mut cells = Vec::new();
    let mut models = Vec::new();
    let mut timings = Vec::new();
    let mut reports = Vec::new();
    for &dataset in &config.datasets {
        for &seed in &config.seeds {
            let name = dataset.name();
            let prepared = splits_for(dataset, seed, None, &config.desk_scale).and_then(|s| {
                let key = ModelCache::key(&s.cache_stem, seed, &train_cfg);
                let model = cache.get_or_train(&key, &s.train, &train_cfg, seed)?;
                Ok((s.train, s.test, s.label_flip_rate, model))
            });
            let (train, test, label_flip_rate, model) = match prepared {
                Ok(p) => p,
                Err(e) => {
                    log::error!("{name} seed {seed}: {e}");
                    cells.extend(config.methods.iter().map(|&m| CellRecord::failed(name, m, seed, e.to_string())));
                    continue;
                }
            };
            let (pred, conf) = model.predict(&test.x)?;
            let correct: Vec<bool> = pred.iter().zip(&test.y).map(|(p, y)| p == y).collect();
            let mut summary = ModelSummary {
                dataset: name.into(),
                seed,
                train_accuracy: model.accuracy(&train.x, &train.y)?,
                test_accuracy: correct.iter().filter(|&&c| c).count() as f64 / test.len() as f64,
                mean_confidence: mean(conf.iter().copied()),
                confidence_correct: mean(conf.iter().zip(&correct).filter(|(_, &c)| c).map(|(v, _)| *v)),
                confidence_wrong: mean(conf.iter().zip(&correct).filter(|(_, &c)| !c).map(|(v, _)| *v)),
                label_flip_rate,
                agop_rank: None,
            };
            let indices: Vec<usize> = (0..test.len()).collect();
            for &method in &config.methods {
                log::info!("{name} seed {seed}: {}", method.label());
                let outcome = Explainer::prepare(method, &model, &train.x, &config.params, seed).and_then(|explainer| {
                    if let Some(f) = &explainer.filter {
                        summary.agop_rank = Some(f.rank());
                    }
                    let attr = explainer.attribute(&test.x, &indices);
                    timings.push(TimingRow {
                        dataset: name.into(),
                        method: method.id().into(),
                        seed,
                        setup_seconds: attr.setup_seconds,
                        attribution_seconds: attr.wall_time_seconds,
                    });
                    evaluate_method(&attr, &test, &model)
                });
                match outcome {
                    Ok(r) => {
                        cells.push(CellRecord::ok(&r));
                        reports.push(r);
                    }
                    Err(e) => {
                        log::error!("{name} seed {seed} {}: {e}", method.id());
                        cells.push(CellRecord::failed(name, method, seed, e.to_string()));
                    }
                }
            }
            models.push(summary);
        }
    }
    let table = aggregate_table(config, &cells);
    Ok(SyntheticResults { cells, models, table, timings, reports })
}
