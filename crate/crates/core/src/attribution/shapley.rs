//! Permutation-sampling Shapley values against a background sample.
//!
//! The game is `v(S) = E_b[ŝ_c(x_S, b_{-S})]`: features outside the coalition
//! take the value of a background row. Each walk pairs a random feature order
//! with one background row and switches features from the background value to
//! `x` one at a time; the increments of the predicted-class logit are that
//! walk's marginal contributions. Permutation `p` is walked against
//! `rows_per_permutation` consecutive background rows starting at
//! `p * rows_per_permutation`, so with the defaults (20 permutations, 10 rows,
//! 200 background rows) every background row is used exactly once.

use super::{finish, SampleAttribution};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{argmax, Mlp};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapleyParams {
    /// Training rows drawn as the background sample.
    pub n_background: usize,
    pub n_permutations: usize,
    pub rows_per_permutation: usize,
}

impl Default for ShapleyParams {
    fn default() -> Self {
        Self { n_background: 200, n_permutations: 20, rows_per_permutation: 10 }
    }
}

impl ShapleyParams {
    pub fn walks(&self) -> usize {
        self.n_permutations * self.rows_per_permutation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyEstimate {
    pub attribution: SampleAttribution,
    /// Estimated Shapley value per feature.
    pub values: Vec<f64>,
    /// Standard error of each value over walks.
    pub std_error: Vec<f64>,
    pub class: usize,
}

pub fn sampled_shapley(
    model: &Mlp,
    x: &[f64],
    background: &Matrix,
    params: &ShapleyParams,
    seed: u64,
) -> Result<ShapleyEstimate> {
    if background.rows() == 0 {
        return Err(Error::Config("Shapley background is empty".into()));
    }
    if params.n_permutations == 0 || params.rows_per_permutation == 0 {
        return Err(Error::Config("Shapley needs at least one permutation and one row per permutation".into()));
    }
    let d = x.len();
    if background.cols() != d {
        return Err(Error::Shape(format!("background has {} columns, input {d}", background.cols())));
    }
    let class = argmax(&model.logits(x)?);
    let mut r = rng::stream(seed, "sampled-shapley");
    let walks = params.walks();
    let mut order: Vec<usize> = (0..d).collect();
    let mut orders = Vec::with_capacity(walks);
    let mut path = Matrix::zeros(walks * (d + 1), d);
    for p in 0..params.n_permutations {
        order.shuffle(&mut r);
        for t in 0..params.rows_per_permutation {
            let w = p * params.rows_per_permutation + t;
            let b = (p * params.rows_per_permutation + t) % background.rows();
            let base = w * (d + 1);
            path.row_mut(base).copy_from_slice(background.row(b));
            for (k, &j) in order.iter().enumerate() {
                let prev = path.row(base + k).to_vec();
                let row = path.row_mut(base + k + 1);
                row.copy_from_slice(&prev);
                row[j] = x[j];
            }
            orders.push(order.clone());
        }
    }
    let logits = model.forward(&path)?;

    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for (w, order) in orders.iter().enumerate() {
        let base = w * (d + 1);
        for (k, &j) in order.iter().enumerate() {
            let delta = logits[(base + k + 1, class)] - logits[(base + k, class)];
            sum[j] += delta;
            sum_sq[j] += delta * delta;
        }
    }
    let n = walks as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = sum_sq
        .iter()
        .zip(&values)
        .map(|(sq, mean)| {
            if walks < 2 {
                return f64::INFINITY;
            }
            let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(ShapleyEstimate { attribution: finish(values.clone())?, values, std_error, class })
}

/// Exact Shapley values of the same background game by enumerating all `2^d`
/// coalitions. Exponential; meant for small `d`.
pub fn exact_shapley(model: &Mlp, x: &[f64], background: &Matrix, class: usize) -> Result<Vec<f64>> {
    let d = x.len();
    assert!(d <= 16, "exact enumeration is limited to 16 features");
    let coalitions = 1usize << d;
    let mut value = vec![0.0; coalitions];
    for (mask, v) in value.iter_mut().enumerate() {
        let rows = Matrix::from_fn(background.rows(), d, |i, j| {
            if mask & (1 << j) != 0 {
                x[j]
            } else {
                background[(i, j)]
            }
        });
        let logits = model.forward(&rows)?;
        *v = logits.column(class).iter().sum::<f64>() / background.rows() as f64;
    }
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    let total = fact(d);
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        for mask in 0..coalitions {
            if mask & (1 << j) != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = fact(s) * fact(d - s - 1) / total;
            *p += weight * (value[mask | (1 << j)] - value[mask]);
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, "shapley-test");
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn linear_model_recovers_weight_times_offset() {
        let w = random(3, 6, 1);
        let model = Mlp::from_layers(vec![Layer::new(w.clone(), vec![0.0; 3]).unwrap()]).unwrap();
        let mut bg = random(50, 6, 2);
        let means = bg.column_means();
        for i in 0..50 {
            for j in 0..6 {
                bg[(i, j)] -= means[j];
            }
        }
        let x = random(1, 6, 3).into_vec();
        let params = ShapleyParams { n_background: 50, n_permutations: 200, rows_per_permutation: 50 };
        let est = sampled_shapley(&model, &x, &bg, &params, 4).unwrap();
        for j in 0..6 {
            let want = w[(est.class, j)] * x[j];
            assert!((est.values[j] - want).abs() <= 0.05 * want.abs() + 1e-12);
        }
    }

    #[test]
    fn null_player_gets_nothing() {
        let model = crate::nn::init_mlp(4, 3, 5).unwrap();
        let mut bg = random(30, 4, 6);
        bg.set_column(2, 0.7);
        let mut x = random(1, 4, 7).into_vec();
        x[2] = 0.7;
        let est = sampled_shapley(&model, &x, &bg, &ShapleyParams::default(), 1).unwrap();
        assert_eq!(est.values[2], 0.0);
        assert_eq!(est.attribution.values[2], 0.0);
    }

    #[test]
    fn efficiency_holds_per_walk() {
        // each walk telescopes from f(b) to f(x), so Σφ = f(x) - mean_b f(b) over the rows used
        let model = crate::nn::init_mlp(5, 3, 3).unwrap();
        let bg = random(200, 5, 8);
        let x = random(1, 5, 9).into_vec();
        let est = sampled_shapley(&model, &x, &bg, &ShapleyParams::default(), 2).unwrap();
        let fx = model.logits(&x).unwrap()[est.class];
        let fb = model.forward(&bg).unwrap().column(est.class).iter().sum::<f64>() / 200.0;
        assert!((est.values.iter().sum::<f64>() - (fx - fb)).abs() < 1e-10);
    }

    #[test]
    fn seed_determinism_and_errors() {
        let model = crate::nn::init_mlp(4, 3, 5).unwrap();
        let bg = random(20, 4, 6);
        let x = random(1, 4, 7).into_vec();
        let p = ShapleyParams::default();
        assert_eq!(sampled_shapley(&model, &x, &bg, &p, 1).unwrap(), sampled_shapley(&model, &x, &bg, &p, 1).unwrap());
        assert!(sampled_shapley(&model, &x, &Matrix::zeros(0, 4), &p, 1).is_err());
        let none = ShapleyParams { n_permutations: 0, ..p };
        assert!(sampled_shapley(&model, &x, &bg, &none, 1).is_err());
    }
}
