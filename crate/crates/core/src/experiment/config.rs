use crate::attribution::{MethodKind, MethodParams};
use crate::data::SyntheticKind;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::roar::{RankingSource, DEFAULT_FRACTIONS, LIME_RANKING_ROWS};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEEDS: [u64; 4] = [0, 1, 2, 42];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Synthetic,
    Roar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Linear,
    Sparse,
    Interaction,
    Adult,
    Credit,
}

impl DatasetId {
    pub fn name(self) -> &'static str {
        match self {
            DatasetId::Linear => "linear",
            DatasetId::Sparse => "sparse",
            DatasetId::Interaction => "interaction",
            DatasetId::Adult => "adult",
            DatasetId::Credit => "credit",
        }
    }

    pub fn synthetic(self) -> Option<SyntheticKind> {
        match self {
            DatasetId::Linear => Some(SyntheticKind::Linear),
            DatasetId::Sparse => Some(SyntheticKind::Sparse),
            DatasetId::Interaction => Some(SyntheticKind::Interaction),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DatasetId::Linear => "Linear",
            DatasetId::Sparse => "Sparse",
            DatasetId::Interaction => "Interaction",
            DatasetId::Adult => "Adult",
            DatasetId::Credit => "Credit",
        }
    }
}

/// Locations of the real datasets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    /// Directory holding `adult.data` and `adult.test`.
    pub adult_dir: Option<PathBuf>,
    pub credit_csv: Option<PathBuf>,
}

/// Reductions that make real-data runs fit a desk budget.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskScale {
    /// Rows sampled from each real dataset before splitting.
    pub rows: Option<usize>,
    /// Overrides the training epochs of every model.
    pub epochs: Option<usize>,
}

impl DeskScale {
    pub fn is_active(&self) -> bool {
        self.rows.is_some() || self.epochs.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoarSettings {
    pub fractions: Vec<f64>,
    /// Adds the mean ground-truth ranking (synthetic data only).
    pub include_ground_truth: bool,
    pub include_random: bool,
    pub lime_ranking_rows: usize,
    /// Training rows over which the Shapley ranking is averaged; all when unset.
    pub shapley_ranking_rows: Option<usize>,
}

impl Default for RoarSettings {
    fn default() -> Self {
        Self {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            include_ground_truth: false,
            include_random: false,
            lime_ranking_rows: LIME_RANKING_ROWS,
            shapley_ranking_rows: None,
        }
    }
}

/// One declarative experiment. Every field defaults to the benchmark setup,
/// so an empty file with only `kind` reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub datasets: Vec<DatasetId>,
    pub methods: Vec<MethodKind>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub train: TrainConfig,
    pub params: MethodParams,
    pub data: DataPaths,
    pub desk_scale: DeskScale,
    pub roar: RoarSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::synthetic()
    }
}

impl ExperimentConfig {
    pub fn synthetic() -> Self {
        Self {
            kind: ExperimentKind::Synthetic,
            datasets: vec![DatasetId::Linear, DatasetId::Sparse, DatasetId::Interaction],
            methods: MethodKind::ALL.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            output_dir: PathBuf::from("results/synthetic"),
            cache_dir: None,
            train: TrainConfig::default(),
            params: MethodParams::default(),
            data: DataPaths::default(),
            desk_scale: DeskScale::default(),
            roar: RoarSettings::default(),
        }
    }

    pub fn roar() -> Self {
        Self {
            kind: ExperimentKind::Roar,
            datasets: vec![DatasetId::Adult, DatasetId::Credit],
            output_dir: PathBuf::from("results/roar"),
            ..Self::synthetic()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        // an explicit kind picks the matching defaults for omitted fields
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = match table.get("kind").and_then(|k| k.as_str()) {
            Some("roar") => toml::Table::try_from(Self::roar()),
            _ => toml::Table::try_from(Self::synthetic()),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in table {
            match (merged.get_mut(&k), v) {
                (Some(toml::Value::Table(base)), toml::Value::Table(over)) => base.extend(over),
                (_, v) => {
                    merged.insert(k, v);
                }
            }
        }
        let config: Self = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The training config after desk-scale overrides.
    pub fn effective_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if let Some(e) = self.desk_scale.epochs {
            t.epochs = e;
        }
        t
    }

    /// Checks everything that can be checked before any compute starts.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("`methods` must not be empty".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("`datasets` must not be empty".into()));
        }
        self.train.validate()?;
        for d in &self.datasets {
            match d {
                DatasetId::Adult if self.data.adult_dir.is_none() => {
                    return Err(Error::Config("dataset `adult` needs `data.adult_dir`".into()))
                }
                DatasetId::Credit if self.data.credit_csv.is_none() => {
                    return Err(Error::Config("dataset `credit` needs `data.credit_csv`".into()))
                }
                _ => {}
            }
            if self.kind == ExperimentKind::Synthetic && d.synthetic().is_none() {
                return Err(Error::Config(format!("dataset `{}` has no ground truth for the synthetic benchmark", d.name())));
            }
        }
        if self.kind == ExperimentKind::Roar {
            self.roar_config(false).validate()?;
        }
        Ok(())
    }

    /// ROAR settings for one dataset.
    pub fn roar_config(&self, ground_truth_available: bool) -> crate::roar::RoarConfig {
        let mut sources: Vec<RankingSource> = self.methods.iter().copied().map(RankingSource::Method).collect();
        if self.roar.include_ground_truth && ground_truth_available {
            sources.push(RankingSource::GroundTruth);
        }
        if self.roar.include_random {
            sources.push(RankingSource::Random);
        }
        crate::roar::RoarConfig {
            sources,
            fractions: self.roar.fractions.clone(),
            train: self.effective_train(),
            methods: self.params.clone(),
            lime_ranking_rows: self.roar.lime_ranking_rows,
            shapley_ranking_rows: self.roar.shapley_ranking_rows,
        }
    }
}
