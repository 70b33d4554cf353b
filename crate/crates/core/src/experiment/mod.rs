//! Declarative experiment runner: the synthetic ground-truth benchmark and
//! remove-and-retrain on synthetic or real data.

mod config;
mod report;
mod roar_run;
mod synthetic;

pub use config::{DataPaths, DatasetId, DeskScale, ExperimentConfig, ExperimentKind, RoarSettings, DEFAULT_SEEDS};
pub use report::{
    emit_report, format_sig, load_report, mark_best, Report, ReportFormat, RoarAucRow, TableRow, TimingRow,
    DETERMINISTIC_ROAR_FILES, DETERMINISTIC_SYNTHETIC_FILES,
};
pub use roar_run::{run_roar_experiment, RoarResults};
pub use synthetic::{run_synthetic_benchmark, CellRecord, ModelSummary, SyntheticResults};

use crate::data::{generate, Dataset};
use crate::error::{Error, Result};
use crate::nn::{init_mlp, load_model, save_model, train, Mlp, TrainConfig};
use crate::rng;
use crate::tabular::{self, RawTable};
use rand::seq::index::sample;
use std::collections::HashMap;
use std::path::PathBuf;

/// Trained models keyed by dataset, seed and training config, kept in memory
/// and optionally mirrored to a directory of checkpoints.
#[derive(Debug, Default)]
pub struct ModelCache {
    dir: Option<PathBuf>,
    memory: HashMap<String, Mlp>,
    hits: usize,
    misses: usize,
}

impl ModelCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()), ..Self::default() }
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn key(dataset: &str, seed: u64, config: &TrainConfig) -> String {
        format!("{dataset}-seed{seed}-{:016x}", config.fingerprint())
    }

    /// Returns the cached model for `key` or trains one on `data`.
    pub fn get_or_train(&mut self, key: &str, data: &Dataset, config: &TrainConfig, seed: u64) -> Result<Mlp> {
        if let Some(m) = self.memory.get(key) {
            self.hits += 1;
            return Ok(m.clone());
        }
        let path = self.dir.as_ref().map(|d| d.join(format!("{key}.bin")));
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            let model = load_model(p)?;
            self.hits += 1;
            self.memory.insert(key.into(), model.clone());
            return Ok(model);
        }
        self.misses += 1;
        log::info!("training {key}");
        let model = init_mlp(data.num_features(), data.num_classes, seed)?;
        let model = train(model, &data.x, &data.y, &config.clone().with_seed(seed)).map_err(|e| e.context(key.to_string()))?;
        if let Some(p) = path {
            std::fs::create_dir_all(p.parent().expect("file in a directory")).map_err(|e| Error::io(&p, e))?;
            save_model(&model, &p)?;
        }
        self.memory.insert(key.into(), model.clone());
        Ok(model)
    }
}

/// Loads a real dataset once so that every seed can subsample it.
pub(crate) fn load_raw(id: DatasetId, paths: &DataPaths) -> Result<RawTable> {
    match id {
        DatasetId::Adult => tabular::load_adult(paths.adult_dir.as_ref().expect("validated")),
        DatasetId::Credit => tabular::load_credit(paths.credit_csv.as_ref().expect("validated")),
        _ => unreachable!("synthetic datasets are generated"),
    }
}

/// Keeps `rows` clean rows drawn without replacement.
pub fn subsample_table(raw: &RawTable, rows: usize, seed: u64) -> RawTable {
    let clean: Vec<Vec<tabular::Value>> = raw.clean_rows().cloned().collect();
    let mut keep: Vec<usize> = if rows < clean.len() {
        sample(&mut rng::stream(seed, "desk-subsample"), clean.len(), rows).into_vec()
    } else {
        (0..clean.len()).collect()
    };
    keep.sort_unstable();
    RawTable {
        schema: raw.schema.clone(),
        flagged: vec![false; keep.len()],
        rows: keep.into_iter().map(|i| clean[i].clone()).collect(),
    }
}

pub(crate) struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    /// Dataset name plus any subsampling, for cache keys.
    pub cache_stem: String,
    pub label_flip_rate: Option<f64>,
}

/// Train and test splits for one `(dataset, seed)`.
pub(crate) fn splits_for(id: DatasetId, seed: u64, raw: Option<&RawTable>, desk: &DeskScale) -> Result<Splits> {
    if let Some(kind) = id.synthetic() {
        let data = generate(kind, seed)?;
        return Ok(Splits {
            train: data.train,
            test: data.test,
            cache_stem: id.name().into(),
            label_flip_rate: Some(data.label_flip_rate),
        });
    }
    let raw = raw.expect("real datasets are loaded up front");
    let (table, cache_stem) = match desk.rows {
        Some(n) => (subsample_table(raw, n, seed), format!("{}-rows{n}", id.name())),
        None => (raw.clone(), id.name().to_string()),
    };
    let (train, test, summary) = match id {
        DatasetId::Adult => tabular::preprocess_adult(&table, seed)?,
        _ => tabular::preprocess_credit(&table, seed)?,
    };
    log::info!(
        "{}: {} rows kept of {}, {} features",
        id.name(),
        summary.rows_read - summary.rows_dropped,
        summary.rows_read,
        summary.features
    );
    Ok(Splits { train, test, cache_stem, label_flip_rate: None })
}

pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
