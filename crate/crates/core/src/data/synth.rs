//! Three-class synthetic tasks with per-sample ground-truth attribution.
//!
//! Raw features are i.i.d. standard normal; labels are the argmax of a known
//! score function plus `N(0, 0.3^2)` noise. Ground truth is input-times-gradient
//! of the noise-free score at the noise-free argmax class, measured from the
//! training mean and normalized. Because that quantity is invariant to
//! per-feature affine rescaling, it is computed in raw coordinates and holds
//! unchanged for the standardized features the model sees.

use super::{default_feature_names, stratified_split, standardize, Dataset, SplitTag};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::argmax;
use crate::rng;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

pub const N_SAMPLES: usize = 5000;
pub const N_FEATURES: usize = 20;
pub const N_CLASSES: usize = 3;
pub const LABEL_NOISE_STD: f64 = 0.3;
pub const TEST_FRACTION: f64 = 0.2;
pub const FD_STEP: f64 = 1e-4;
const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Linear,
    Sparse,
    Interaction,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [SyntheticKind::Linear, SyntheticKind::Sparse, SyntheticKind::Interaction];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Linear => "linear",
            SyntheticKind::Sparse => "sparse",
            SyntheticKind::Interaction => "interaction",
        }
    }

    pub fn informative_count(self) -> usize {
        match self {
            SyntheticKind::Interaction => 6,
            _ => 5,
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        SyntheticKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::error::Error::Config(format!("unknown synthetic dataset `{s}`")))
    }
}

/// True class scores of a synthetic task, in raw feature coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreFunction {
    /// `s = W x[..5]` with `W` of shape 3x5.
    Linear { w: Matrix },
    /// `sin(x0) + x1^2`, `x2 x3 + x4`, `cos(x0 + x1) + x3^2`.
    Sparse,
    /// `x0 x1 + x2`, `x3 x4 + x5`, `x0 x3 + x1 x4`.
    Interaction,
}

impl ScoreFunction {
    pub fn kind(&self) -> SyntheticKind {
        match self {
            ScoreFunction::Linear { .. } => SyntheticKind::Linear,
            ScoreFunction::Sparse => SyntheticKind::Sparse,
            ScoreFunction::Interaction => SyntheticKind::Interaction,
        }
    }

    pub fn scores(&self, x: &[f64]) -> [f64; 3] {
        match self {
            ScoreFunction::Linear { w } => {
                let mut s = [0.0; 3];
                for (c, out) in s.iter_mut().enumerate() {
                    *out = (0..5).map(|j| w[(c, j)] * x[j]).sum();
                }
                s
            }
            ScoreFunction::Sparse => {
                [x[0].sin() + x[1] * x[1], x[2] * x[3] + x[4], (x[0] + x[1]).cos() + x[3] * x[3]]
            }
            ScoreFunction::Interaction => [x[0] * x[1] + x[2], x[3] * x[4] + x[5], x[0] * x[3] + x[1] * x[4]],
        }
    }

    pub fn score(&self, x: &[f64], class: usize) -> f64 {
        self.scores(x)[class]
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

/// `|W_c,j (x_j - x̄_j)|` over the five informative features, normalized;
/// `None` when the normalizer is below `1e-12`.
pub fn closed_form_linear_gt(w: &Matrix, x: &[f64], x_bar: &[f64], class: usize) -> Option<Vec<f64>> {
    let mut e = vec![0.0; x.len()];
    for j in 0..w.cols() {
        e[j] = (w[(class, j)] * (x[j] - x_bar[j])).abs();
    }
    normalize_exact(e)
}

/// Central-difference input-times-gradient of `s_class`, normalized.
pub fn ground_truth_fd(score: &ScoreFunction, x: &[f64], x_bar: &[f64], class: usize, h: f64) -> Option<Vec<f64>> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    let e = (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = score.score(&probe, class);
            probe[j] = x[j] - h;
            let down = score.score(&probe, class);
            probe[j] = x[j];
            ((x[j] - x_bar[j]) * (up - down) / (2.0 * h)).abs()
        })
        .collect();
    normalize_exact(e)
}

fn normalize_exact(e: Vec<f64>) -> Option<Vec<f64>> {
    let total: f64 = e.iter().sum();
    (total >= DEGENERATE_DENOMINATOR).then(|| e.into_iter().map(|v| v / total).collect())
}

/// Train and test splits of one synthetic task.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    pub score: ScoreFunction,
    /// Fraction of all generated labels that differ from the noise-free argmax.
    pub label_flip_rate: f64,
}

pub fn gen_linear(seed: u64) -> Result<SyntheticData> {
    generate(SyntheticKind::Linear, seed)
}

pub fn gen_sparse(seed: u64) -> Result<SyntheticData> {
    generate(SyntheticKind::Sparse, seed)
}

pub fn gen_interaction(seed: u64) -> Result<SyntheticData> {
    generate(SyntheticKind::Interaction, seed)
}

fn linear_weights(seed: u64) -> Matrix {
    let mut r = rng::stream(seed, "linear-weights");
    Matrix::from_fn(N_CLASSES, 5, |_, _| {
        let magnitude = r.random_range(0.5..2.0);
        if r.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    })
}

/// Generates `n = 5000, d = 20, C = 3` with a stratified 80/20 split.
pub fn generate(kind: SyntheticKind, seed: u64) -> Result<SyntheticData> {
    let score = match kind {
        SyntheticKind::Linear => ScoreFunction::Linear { w: linear_weights(seed) },
        SyntheticKind::Sparse => ScoreFunction::Sparse,
        SyntheticKind::Interaction => ScoreFunction::Interaction,
    };

    let mut feature_rng = rng::stream(seed, "features");
    let raw = Matrix::from_fn(N_SAMPLES, N_FEATURES, |_, _| StandardNormal.sample(&mut feature_rng));
    let noise = Normal::new(0.0, LABEL_NOISE_STD).expect("valid std");
    let mut noise_rng = rng::stream(seed, "label-noise");
    let mut flips = 0;
    let labels: Vec<usize> = raw
        .row_iter()
        .map(|x| {
            let clean = score.scores(x);
            let noisy = clean.map(|s| s + noise.sample(&mut noise_rng));
            let y = argmax(&noisy);
            flips += usize::from(y != argmax(&clean));
            y
        })
        .collect();

    let (train_idx, test_idx) = stratified_split(&labels, TEST_FRACTION, seed)?;
    let raw_train = raw.select_rows(&train_idx);
    let raw_test = raw.select_rows(&test_idx);
    let (x_train, x_test, st) = standardize(&raw_train, &raw_test)?;
    let raw_mean = raw_train.column_means();

    let k = kind.informative_count();
    let mask: Vec<bool> = (0..N_FEATURES).map(|j| j < k).collect();

    let ground_truth = |rows: &Matrix| -> (Matrix, Vec<bool>) {
        let mut gt = Matrix::zeros(rows.rows(), N_FEATURES);
        let mut degenerate = vec![false; rows.rows()];
        for (i, x) in rows.row_iter().enumerate() {
            let class = score.predict(x);
            let attr = match &score {
                ScoreFunction::Linear { w } => closed_form_linear_gt(w, x, &raw_mean, class),
                other => ground_truth_fd(other, x, &raw_mean, class, FD_STEP),
            };
            match attr {
                Some(a) => gt.row_mut(i).copy_from_slice(&a),
                None => degenerate[i] = true,
            }
        }
        (gt, degenerate)
    };
    let (gt_train, deg_train) = ground_truth(&raw_train);
    let (gt_test, deg_test) = ground_truth(&raw_test);

    let baseline = x_train.column_means();
    let make = |split, x: Matrix, idx: &[usize], gt: Matrix, degenerate: Vec<bool>| Dataset {
        name: kind.name().to_string(),
        split,
        seed,
        feature_names: default_feature_names(N_FEATURES),
        x,
        y: idx.iter().map(|&i| labels[i]).collect(),
        num_classes: N_CLASSES,
        informative_mask: Some(mask.clone()),
        ground_truth: Some(gt),
        degenerate,
        baseline: baseline.clone(),
        standardization: Some(st.clone()),
    };
    Ok(SyntheticData {
        train: make(SplitTag::Train, x_train.clone(), &train_idx, gt_train, deg_train),
        test: make(SplitTag::Test, x_test, &test_idx, gt_test, deg_test),
        label_flip_rate: flips as f64 / N_SAMPLES as f64,
        score,
    })
}
