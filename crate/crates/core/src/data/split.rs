use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Per-feature affine map `x' = (x - mean) / std`. Columns left untouched carry
/// mean 0 and std 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - self.means[j]) / self.stds[j])
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.means.iter().zip(&self.stds)).map(|(v, (m, s))| m + s * v).collect()
    }
}

/// Stratified train/test split over row indices.
///
/// The test set has `ceil(test_fraction * n)` rows, allotted to classes by
/// largest remainder so each class is within one row of its exact share.
/// Both index lists come back sorted.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < 2 {
            return Err(Error::Stratification { class, count: members.len() });
        }
    }

    let n = labels.len();
    let n_test = ((test_fraction * n as f64) - 1e-9).ceil() as usize;
    let exact: Vec<f64> = by_class.iter().map(|m| test_fraction * m.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..num_classes).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = n_test.saturating_sub(quota.iter().sum());
    for &c in order.iter().cycle().take(num_classes * 2) {
        if remaining == 0 {
            break;
        }
        if quota[c] + 1 < by_class[c].len() {
            quota[c] += 1;
            remaining -= 1;
        }
    }

    let mut r = rng::stream(seed, "stratified-split");
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (members, &q) in by_class.iter_mut().zip(&quota) {
        members.shuffle(&mut r);
        test.extend_from_slice(&members[..q]);
        train.extend_from_slice(&members[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Fits mean and population std on `train_x` and applies them to both splits.
pub fn standardize(train_x: &Matrix, test_x: &Matrix) -> Result<(Matrix, Matrix, Standardization)> {
    let all: Vec<usize> = (0..train_x.cols()).collect();
    standardize_columns(train_x, test_x, &all)
}

/// As [`standardize`] but only for `columns`; the rest pass through unchanged.
pub fn standardize_columns(
    train_x: &Matrix,
    test_x: &Matrix,
    columns: &[usize],
) -> Result<(Matrix, Matrix, Standardization)> {
    if train_x.cols() != test_x.cols() {
        return Err(Error::Shape(format!("train has {} columns, test {}", train_x.cols(), test_x.cols())));
    }
    let d = train_x.cols();
    let n = train_x.rows() as f64;
    let mut means = vec![0.0; d];
    let mut stds = vec![1.0; d];
    for &j in columns {
        let col = train_x.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 1e-12) {
            return Err(Error::ConstantFeature { feature: j });
        }
        means[j] = mean;
        stds[j] = std;
    }
    let st = Standardization { means, stds };
    Ok((st.apply(train_x), st.apply(test_x), st))
}
