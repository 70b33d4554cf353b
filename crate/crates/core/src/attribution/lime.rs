//! Local surrogate: a kernel-weighted ridge regression of the predicted-class
//! logit on Gaussian perturbations of the input.

use super::{finish, SampleAttribution};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{argmax, Mlp};
use crate::rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeParams {
    pub n_samples: usize,
    /// Defaults to `0.75 * sqrt(d)`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
}

impl Default for LimeParams {
    fn default() -> Self {
        Self { n_samples: 1000, kernel_width: None, ridge: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimeFit {
    pub attribution: SampleAttribution,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub class: usize,
}

/// Draws `z ~ N(x, I)`, weights each by `exp(-|z - x|^2 / w^2)`, and fits
/// `ŝ_c(z) ≈ β·z + β0` by weighted ridge with an unpenalized intercept.
pub fn lime_tabular(model: &Mlp, x: &[f64], params: &LimeParams, seed: u64) -> Result<LimeFit> {
    let d = x.len();
    if params.n_samples < d + 2 {
        return Err(Error::Config(format!("LIME needs at least d + 2 = {} samples, got {}", d + 2, params.n_samples)));
    }
    let width = params.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    let class = argmax(&model.logits(x)?);

    let mut r = rng::stream(seed, "lime-perturbations");
    let n = params.n_samples;
    let z = Matrix::from_fn(n, d, |_, j| {
        let e: f64 = StandardNormal.sample(&mut r);
        x[j] + e
    });
    let targets = model.forward(&z)?.column(class);
    let weights: Vec<f64> = z
        .row_iter()
        .map(|row| {
            let dist2: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-dist2 / (width * width)).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 1e-12) {
        return Err(Error::SurrogateFit(format!("kernel weights sum to {total:e}")));
    }

    let mut mean_z = vec![0.0; d];
    let mut mean_y = 0.0;
    for ((row, &w), &y) in z.row_iter().zip(&weights).zip(&targets) {
        mean_z.iter_mut().zip(row).for_each(|(m, v)| *m += w * v);
        mean_y += w * y;
    }
    mean_z.iter_mut().for_each(|m| *m /= total);
    mean_y /= total;

    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    let mut centred = vec![0.0; d];
    for ((row, &w), &y) in z.row_iter().zip(&weights).zip(&targets) {
        centred.iter_mut().zip(row.iter().zip(&mean_z)).for_each(|(c, (v, m))| *c = v - m);
        let dy = y - mean_y;
        for a in 0..d {
            let wa = w * centred[a];
            rhs[a] += wa * dy;
            let g = gram.row_mut(a);
            for b in a..d {
                g[b] += wa * centred[b];
            }
        }
    }
    for a in 0..d {
        gram[(a, a)] += params.ridge;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let coefficients = solve_spd(&gram, &rhs)?;
    let intercept = mean_y - crate::matrix::dot(&coefficients, &mean_z);
    Ok(LimeFit { attribution: finish(coefficients.clone())?, coefficients, intercept, class })
}

/// Cholesky solve of a symmetric positive-definite system.
fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let diag = a[(i, i)] - s;
                if !(diag > 0.0) {
                    return Err(Error::SurrogateFit(format!("normal equations not positive definite at {i}")));
                }
                l[(i, i)] = diag.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[(i, k)] * y[k]).sum::<f64>()) / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[(k, i)] * x[k]).sum::<f64>()) / l[(i, i)];
    }
    Ok(x)
}
