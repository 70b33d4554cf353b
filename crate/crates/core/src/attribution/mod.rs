//! Per-sample feature attribution.
//!
//! Every method reduces to a raw score per feature which is then normalized as
//! `r_j = |e_j| / (Σ|e_k| + 1e-8)`. A sample whose raw scores are numerically
//! zero gets a uniform vector and is flagged so evaluation can skip it.

pub mod agop;
pub mod gradient;
pub mod lime;
pub mod shapley;

pub use agop::{agop_ixg, agop_ixg_batch, fit_agop, fit_agop_with_threshold, AgopFilter};
pub use gradient::{input_x_gradient, input_x_gradient_batch, integrated_gradients, IntegratedGradients};
pub use lime::{lime_tabular, LimeFit, LimeParams};
pub use shapley::{exact_shapley, sampled_shapley, ShapleyEstimate, ShapleyParams};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Mlp;
use crate::rng;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

pub const NORMALIZATION_EPS: f64 = 1e-8;
/// Below this total magnitude a raw attribution counts as identically zero.
pub const ZERO_ATTRIBUTION: f64 = 1e-12;

/// `|raw_j| / (Σ|raw_k| + 1e-8)`.
pub fn normalize_attribution(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("raw attribution".into()));
    }
    let total: f64 = raw.iter().map(|v| v.abs()).sum();
    Ok(raw.iter().map(|v| v.abs() / (total + NORMALIZATION_EPS)).collect())
}

/// A normalized attribution vector for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleAttribution {
    pub values: Vec<f64>,
    /// The raw scores summed to less than `1e-12`; `values` is uniform.
    pub zero: bool,
}

pub(crate) fn finish(raw: Vec<f64>) -> Result<SampleAttribution> {
    let total: f64 = raw.iter().map(|v| v.abs()).sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("raw attribution".into()));
    }
    if total < ZERO_ATTRIBUTION {
        let d = raw.len().max(1);
        return Ok(SampleAttribution { values: vec![1.0 / d as f64; raw.len()], zero: true });
    }
    Ok(SampleAttribution { values: normalize_attribution(&raw)?, zero: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    AgopIxg,
    InputXGradient,
    IntegratedGradients,
    SampledShapley,
    Lime,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::AgopIxg,
        MethodKind::Lime,
        MethodKind::SampledShapley,
        MethodKind::IntegratedGradients,
        MethodKind::InputXGradient,
    ];

    /// Identifier used in configs and file names.
    pub fn id(self) -> &'static str {
        match self {
            MethodKind::AgopIxg => "agop_ixg",
            MethodKind::InputXGradient => "input_x_gradient",
            MethodKind::IntegratedGradients => "integrated_gradients",
            MethodKind::SampledShapley => "sampled_shapley",
            MethodKind::Lime => "lime",
        }
    }

    /// Label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            MethodKind::AgopIxg => "AGOP-IxG",
            MethodKind::InputXGradient => "InputXGrad",
            MethodKind::IntegratedGradients => "IntGrad",
            MethodKind::SampledShapley => "Shapley (sampled)",
            MethodKind::Lime => "LIME",
        }
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Hyperparameters of every method; defaults follow the benchmark setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    pub agop_threshold: f64,
    pub ig_steps: usize,
    pub shapley: ShapleyParams,
    pub lime: LimeParams,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            agop_threshold: agop::DEFAULT_REL_THRESHOLD,
            ig_steps: 50,
            shapley: ShapleyParams::default(),
            lime: LimeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    ZeroAttribution,
    Failed(String),
}

/// Normalized attributions for a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix {
    pub values: Matrix,
    pub method: MethodKind,
    /// Time spent attributing the rows.
    pub wall_time_seconds: f64,
    /// Time spent on one-off preparation (the AGOP fit, background sampling).
    pub setup_seconds: f64,
    pub sample_indices: Vec<usize>,
    pub status: Vec<RowStatus>,
}

impl AttributionMatrix {
    pub fn flagged(&self, i: usize) -> bool {
        self.status[i] != RowStatus::Ok
    }

    pub fn total_seconds(&self) -> f64 {
        self.wall_time_seconds + self.setup_seconds
    }
}

/// Everything a method needs besides the rows being explained.
#[derive(Debug, Clone)]
pub struct Explainer<'a> {
    pub method: MethodKind,
    pub model: &'a Mlp,
    pub params: MethodParams,
    pub baseline: Vec<f64>,
    pub filter: Option<AgopFilter>,
    pub background: Option<Matrix>,
    pub seed: u64,
    pub setup_seconds: f64,
}

impl<'a> Explainer<'a> {
    /// Fits whatever the method needs from the training split `train_x`.
    pub fn prepare(method: MethodKind, model: &'a Mlp, train_x: &Matrix, params: &MethodParams, seed: u64) -> Result<Self> {
        let start = Instant::now();
        let mut filter = None;
        let mut background = None;
        match method {
            MethodKind::AgopIxg => filter = Some(fit_agop_with_threshold(model, train_x, params.agop_threshold)?),
            MethodKind::SampledShapley => {
                let n = params.shapley.n_background.min(train_x.rows());
                let mut r = rng::stream(seed, "shapley-background");
                let mut idx = sample(&mut r, train_x.rows(), n).into_vec();
                idx.sort_unstable();
                background = Some(train_x.select_rows(&idx));
            }
            _ => {}
        }
        Ok(Self {
            method,
            model,
            params: params.clone(),
            baseline: train_x.column_means(),
            filter,
            background,
            seed,
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn explain_one(&self, x: &[f64], index: usize) -> Result<SampleAttribution> {
        let sample_seed = rng::derive_seed(self.seed, &format!("{}:{index}", self.method.id()));
        match self.method {
            MethodKind::AgopIxg => agop_ixg(self.filter.as_ref().expect("prepared"), self.model, x),
            MethodKind::InputXGradient => input_x_gradient(self.model, x),
            MethodKind::IntegratedGradients => {
                Ok(integrated_gradients(self.model, x, &self.baseline, self.params.ig_steps)?.attribution)
            }
            MethodKind::SampledShapley => Ok(sampled_shapley(
                self.model,
                x,
                self.background.as_ref().expect("prepared"),
                &self.params.shapley,
                sample_seed,
            )?
            .attribution),
            MethodKind::Lime => Ok(lime_tabular(self.model, x, &self.params.lime, sample_seed)?.attribution),
        }
    }

    /// Attributes every row. Failures are recorded per row; the batch never aborts.
    /// `indices[i]` names row `i` and seeds its random stream.
    pub fn attribute(&self, rows: &Matrix, indices: &[usize]) -> AttributionMatrix {
        assert_eq!(rows.rows(), indices.len(), "one index per row");
        let d = rows.cols();
        let start = Instant::now();
        let batched = match self.method {
            MethodKind::AgopIxg => Some(agop_ixg_batch(self.filter.as_ref().expect("prepared"), self.model, rows)),
            MethodKind::InputXGradient => Some(input_x_gradient_batch(self.model, rows)),
            _ => None,
        };
        let results: Vec<Result<SampleAttribution>> = match batched {
            Some(Ok(all)) => all.into_iter().map(Ok).collect(),
            // fall back to per-row so a single bad row is isolated
            Some(Err(_)) | None => {
                rows.row_iter().zip(indices).map(|(x, &i)| self.explain_one(x, i)).collect()
            }
        };
        let wall = start.elapsed().as_secs_f64();

        let mut values = Matrix::zeros(rows.rows(), d);
        let mut status = Vec::with_capacity(rows.rows());
        for (i, res) in results.into_iter().enumerate() {
            match res {
                Ok(a) => {
                    values.row_mut(i).copy_from_slice(&a.values);
                    status.push(if a.zero { RowStatus::ZeroAttribution } else { RowStatus::Ok });
                }
                Err(e) => {
                    values.row_mut(i).iter_mut().for_each(|v| *v = 1.0 / d as f64);
                    status.push(RowStatus::Failed(e.to_string()));
                }
            }
        }
        AttributionMatrix {
            values,
            method: self.method,
            wall_time_seconds: wall,
            setup_seconds: self.setup_seconds,
            sample_indices: indices.to_vec(),
            status,
        }
    }
}

/// Prepares `method` on `train_x` and attributes every row of `rows`.
pub fn attribute_dataset(
    method: MethodKind,
    params: &MethodParams,
    model: &Mlp,
    train_x: &Matrix,
    rows: &Matrix,
    seed: u64,
) -> Result<AttributionMatrix> {
    let explainer = Explainer::prepare(method, model, train_x, params, seed)?;
    let indices: Vec<usize> = (0..rows.rows()).collect();
    Ok(explainer.attribute(rows, &indices))
}

#[derive(Debug, Serialize, Deserialize)]
struct AttributionSidecar {
    method: MethodKind,
    label: String,
    params: MethodParams,
    wall_time_seconds: f64,
    setup_seconds: f64,
    status: Vec<RowStatus>,
}

/// CSV with `sample_index, a_0..a_{d-1}` rows and a JSON sidecar.
pub fn export_attributions(attr: &AttributionMatrix, params: &MethodParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["sample_index".to_string()];
    header.extend((0..attr.values.cols()).map(|j| format!("a_{j}")));
    w.write_record(&header)?;
    for (i, row) in attr.values.row_iter().enumerate() {
        let mut rec = vec![attr.sample_indices[i].to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = crate::data::sidecar_path(path);
    let meta = AttributionSidecar {
        method: attr.method,
        label: attr.method.label().into(),
        params: params.clone(),
        wall_time_seconds: attr.wall_time_seconds,
        setup_seconds: attr.setup_seconds,
        status: attr.status.clone(),
    };
    std::fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(side, e))
}

pub fn import_attributions(path: impl AsRef<Path>) -> Result<(AttributionMatrix, MethodParams)> {
    let path = path.as_ref();
    let side = crate::data::sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: AttributionSidecar = serde_json::from_str(&text)?;
    let mut r = csv::Reader::from_path(path)?;
    let d = r.headers()?.len().saturating_sub(1);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse_err = |e: &dyn std::fmt::Display| Error::RowParse { row, detail: e.to_string() };
        indices.push(rec[0].parse::<usize>().map_err(|e| parse_err(&e))?);
        for field in rec.iter().skip(1) {
            data.push(field.parse::<f64>().map_err(|e| parse_err(&e))?);
        }
    }
    let n = indices.len();
    Ok((
        AttributionMatrix {
            values: Matrix::from_vec(n, d, data)?,
            method: meta.method,
            wall_time_seconds: meta.wall_time_seconds,
            setup_seconds: meta.setup_seconds,
            sample_indices: indices,
            status: meta.status,
        },
        meta.params,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_mlp;
    use proptest::prelude::*;

    #[test]
    fn normalization_examples() {
        let r = normalize_attribution(&[3.0, -1.0, 0.0]).unwrap();
        assert!((r[0] - 0.75).abs() < 1e-8 && (r[1] - 0.25).abs() < 1e-8 && r[2] == 0.0);
        assert_eq!(normalize_attribution(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert!(matches!(normalize_attribution(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
    }

    proptest! {
        #[test]
        fn normalization_is_scale_invariant(v in prop::collection::vec(-10.0f64..10.0, 2..30), c in 0.01f64..100.0) {
            prop_assume!(v.iter().map(|x| x.abs()).sum::<f64>() > 1e-3);
            let a = normalize_attribution(&v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = normalize_attribution(&scaled).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-7));
            prop_assert!(a.iter().all(|&x| x >= 0.0));
            let s: f64 = a.iter().sum();
            prop_assert!(s <= 1.0 && s >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn batch_rows_are_normalized_and_reproducible() {
        let train = Matrix::from_fn(300, 6, |i, j| ((i * 13 + j * 7) % 17) as f64 / 8.0 - 1.0);
        let labels: Vec<usize> = train.row_iter().map(|r| crate::nn::argmax(&r[..3])).collect();
        let model = crate::nn::train(init_mlp(6, 3, 4).unwrap(), &train, &labels, &crate::nn::TrainConfig::default().with_epochs(20)).unwrap();
        let rows = train.select_rows(&(0..20).collect::<Vec<_>>());
        let params = MethodParams {
            shapley: ShapleyParams { n_background: 50, n_permutations: 5, rows_per_permutation: 2 },
            lime: LimeParams { n_samples: 100, ..Default::default() },
            ig_steps: 10,
            ..Default::default()
        };
        for method in MethodKind::ALL {
            let a = attribute_dataset(method, &params, &model, &train, &rows, 7).unwrap();
            let b = attribute_dataset(method, &params, &model, &train, &rows, 7).unwrap();
            assert_eq!(a.values, b.values, "{method:?}");
            for row in a.values.row_iter() {
                assert!(row.iter().all(|&v| v >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn failed_rows_are_flagged_not_fatal() {
        let model = init_mlp(3, 3, 1).unwrap();
        let train = Matrix::from_fn(40, 3, |i, j| (i + j) as f64 * 0.1);
        let mut rows = Matrix::from_fn(3, 3, |i, j| (i * j) as f64 + 0.5);
        rows[(1, 1)] = f64::NAN;
        let a = attribute_dataset(MethodKind::InputXGradient, &MethodParams::default(), &model, &train, &rows, 0).unwrap();
        assert_eq!(a.status[0], RowStatus::Ok);
        assert!(matches!(a.status[1], RowStatus::Failed(_)));
        assert_eq!(a.status[2], RowStatus::Ok);
    }

    #[test]
    fn export_round_trip() {
        let model = init_mlp(4, 3, 1).unwrap();
        let train = Matrix::from_fn(30, 4, |i, j| (i as f64 - j as f64) * 0.1);
        let params = MethodParams::default();
        let a = attribute_dataset(MethodKind::AgopIxg, &params, &model, &train, &train, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attr.csv");
        export_attributions(&a, &params, &path).unwrap();
        let (b, p) = import_attributions(&path).unwrap();
        assert_eq!(b, a);
        assert_eq!(p, params);
    }
}
