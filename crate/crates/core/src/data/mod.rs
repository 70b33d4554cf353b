//! Tabular datasets, splitting, and the synthetic ground-truth generators.

mod split;
pub mod synth;

pub use split::{standardize, standardize_columns, stratified_split, Standardization};
pub use synth::{
    closed_form_linear_gt, gen_interaction, gen_linear, gen_sparse, generate, ground_truth_fd, ScoreFunction,
    SyntheticData, SyntheticKind,
};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
}

/// One split of a tabular classification dataset, already in model space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: SplitTag,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<usize>,
    pub num_classes: usize,
    /// `true` where a feature carries signal; absent for real data.
    pub informative_mask: Option<Vec<bool>>,
    /// Rows are normalized true attributions; degenerate rows are all zero.
    pub ground_truth: Option<Matrix>,
    /// Rows whose ground-truth normalizer vanished.
    pub degenerate: Vec<bool>,
    /// Per-feature mean of the training split in model space (the baseline `x'`).
    pub baseline: Vec<f64>,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn num_features(&self) -> usize {
        self.x.cols()
    }

    /// Number of informative features, i.e. `k` for top-k precision.
    pub fn informative_count(&self) -> Option<usize> {
        self.informative_mask.as_ref().map(|m| m.iter().filter(|&&b| b).count())
    }

    /// Fraction of the most frequent label.
    pub fn majority_rate(&self) -> f64 {
        let mut counts = vec![0usize; self.num_classes];
        for &y in &self.y {
            counts[y] += 1;
        }
        counts.into_iter().max().unwrap_or(0) as f64 / self.len().max(1) as f64
    }

    /// A subset of rows keeping every other field.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            ground_truth: self.ground_truth.as_ref().map(|g| g.select_rows(indices)),
            degenerate: if self.degenerate.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.degenerate[i]).collect()
            },
            ..self.clone()
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    name: String,
    split: SplitTag,
    seed: u64,
    num_classes: usize,
    feature_names: Vec<String>,
    informative_mask: Option<Vec<bool>>,
    has_ground_truth: bool,
    degenerate_rows: Vec<usize>,
    baseline: Vec<f64>,
    standardization: Option<Standardization>,
}

/// Path of the JSON sidecar that accompanies a CSV export.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `<path>` as CSV (`features..., label[, gt_features...]`) and a JSON
/// sidecar next to it. Floats use the shortest repr that round-trips.
pub fn export_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ds.feature_names.clone();
    header.push("label".into());
    if ds.ground_truth.is_some() {
        header.extend(ds.feature_names.iter().map(|n| format!("gt_{n}")));
    }
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.y[i].to_string());
        if let Some(gt) = &ds.ground_truth {
            rec.extend(gt.row(i).iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let sidecar = Sidecar {
        name: ds.name.clone(),
        split: ds.split,
        seed: ds.seed,
        num_classes: ds.num_classes,
        feature_names: ds.feature_names.clone(),
        informative_mask: ds.informative_mask.clone(),
        has_ground_truth: ds.ground_truth.is_some(),
        degenerate_rows: ds.degenerate.iter().enumerate().filter(|(_, &d)| d).map(|(i, _)| i).collect(),
        baseline: ds.baseline.clone(),
        standardization: ds.standardization.clone(),
    };
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(side, e))
}

pub fn import_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_str(&text)?;
    let d = meta.feature_names.len();
    let width = d + 1 + if meta.has_ground_truth { d } else { 0 };

    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != width {
        return Err(Error::Schema(format!("expected {width} columns, header has {}", header.len())));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut gt = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::RowParse { row, detail: format!("{} fields, expected {width}", rec.len()) });
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::RowParse { row, detail: format!("`{s}`: {e}") })
        };
        for field in rec.iter().take(d) {
            x.push(num(field)?);
        }
        y.push(rec[d].parse::<usize>().map_err(|e| Error::RowParse { row, detail: format!("label: {e}") })?);
        for field in rec.iter().skip(d + 1) {
            gt.push(num(field)?);
        }
    }
    let n = y.len();
    let mut degenerate = vec![false; if meta.has_ground_truth { n } else { 0 }];
    for i in meta.degenerate_rows {
        if let Some(flag) = degenerate.get_mut(i) {
            *flag = true;
        }
    }
    Ok(Dataset {
        name: meta.name,
        split: meta.split,
        seed: meta.seed,
        feature_names: meta.feature_names,
        x: Matrix::from_vec(n, d, x)?,
        y,
        num_classes: meta.num_classes,
        informative_mask: meta.informative_mask,
        ground_truth: if meta.has_ground_truth { Some(Matrix::from_vec(n, d, gt)?) } else { None },
        degenerate,
        baseline: meta.baseline,
        standardization: meta.standardization,
    })
}

pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_import_round_trip() {
        let data = gen_sparse(3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.csv");
        export_dataset(&data.test, &path).unwrap();
        let back = import_dataset(&path).unwrap();
        assert_eq!(back, data.test);
    }

    #[test]
    fn select_keeps_alignment() {
        let data = gen_linear(0).unwrap();
        let sub = data.test.select(&[3, 1]);
        assert_eq!(sub.x.row(0), data.test.x.row(3));
        assert_eq!(sub.y, vec![data.test.y[3], data.test.y[1]]);
        assert_eq!(sub.ground_truth.unwrap().row(1), data.test.ground_truth.as_ref().unwrap().row(1));
    }
}
