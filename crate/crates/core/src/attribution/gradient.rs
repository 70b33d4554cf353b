//! InputXGradient and Integrated Gradients.

use super::{finish, SampleAttribution};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{argmax, Mlp};

/// `e_j = x_j ∂ŝ_c/∂x_j` at the predicted class, normalized. No baseline shift.
pub fn input_x_gradient(model: &Mlp, x: &[f64]) -> Result<SampleAttribution> {
    let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(input_x_gradient_batch(model, &batch)?.remove(0))
}

pub fn input_x_gradient_batch(model: &Mlp, rows: &Matrix) -> Result<Vec<SampleAttribution>> {
    let g = model.input_gradient(rows)?;
    rows.row_iter()
        .zip(g.row_iter())
        .map(|(x, gr)| finish(x.iter().zip(gr).map(|(a, b)| a * b).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedGradients {
    pub attribution: SampleAttribution,
    /// `(x - x') ⊙ mean gradient`, before taking magnitudes.
    pub signed: Vec<f64>,
    /// Class whose logit was integrated (the prediction at `x`).
    pub class: usize,
}

/// Right-endpoint Riemann approximation of the path integral from `baseline`
/// to `x`, evaluated at `baseline + (t/steps)(x - baseline)` for `t = 1..=steps`.
/// The class is pinned to the prediction at `x` along the whole path.
pub fn integrated_gradients(model: &Mlp, x: &[f64], baseline: &[f64], steps: usize) -> Result<IntegratedGradients> {
    if steps == 0 {
        return Err(Error::Config("integrated gradients needs at least one step".into()));
    }
    if baseline.len() != x.len() {
        return Err(Error::Shape(format!("baseline has {} entries, input {}", baseline.len(), x.len())));
    }
    let class = argmax(&model.logits(x)?);
    let d = x.len();
    let path = Matrix::from_fn(steps, d, |t, j| {
        let alpha = (t + 1) as f64 / steps as f64;
        baseline[j] + alpha * (x[j] - baseline[j])
    });
    let (_, grads) = model.class_score_gradient(&path, &vec![class; steps])?;
    let mut mean = vec![0.0; d];
    for row in grads.row_iter() {
        mean.iter_mut().zip(row).for_each(|(m, g)| *m += g);
    }
    let signed: Vec<f64> = (0..d).map(|j| (x[j] - baseline[j]) * mean[j] / steps as f64).collect();
    Ok(IntegratedGradients { attribution: finish(signed.clone())?, signed, class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_mlp, Layer};
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn linear_model(seed: u64) -> (Mlp, Matrix) {
        let mut r = rng::stream(seed, "ig-test");
        let w = Matrix::from_fn(3, 6, |_, _| StandardNormal.sample(&mut r));
        (Mlp::from_layers(vec![Layer::new(w.clone(), vec![0.5, -0.5, 0.0]).unwrap()]).unwrap(), w)
    }

    fn point(seed: u64, d: usize) -> Vec<f64> {
        let mut r = rng::stream(seed, "ig-point");
        (0..d).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    #[test]
    fn linear_ixg_is_weight_times_input() {
        let (m, w) = linear_model(1);
        for s in 0..20 {
            let x = point(s, 6);
            let c = argmax(&m.logits(&x).unwrap());
            let raw: Vec<f64> = (0..6).map(|j| (x[j] * w[(c, j)]).abs()).collect();
            let total: f64 = raw.iter().sum();
            let got = input_x_gradient(&m, &x).unwrap();
            assert!(got.values.iter().zip(&raw).all(|(a, b)| (a - b / (total + 1e-8)).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_input_flags_ixg() {
        let m = init_mlp(4, 3, 0).unwrap();
        assert!(input_x_gradient(&m, &[0.0; 4]).unwrap().zero);
    }

    #[test]
    fn linear_ig_is_exact_for_any_step_count() {
        let (m, w) = linear_model(2);
        let x = point(3, 6);
        let base = point(4, 6);
        let c = argmax(&m.logits(&x).unwrap());
        for steps in [1, 7, 50] {
            let ig = integrated_gradients(&m, &x, &base, steps).unwrap();
            for j in 0..6 {
                let want = (x[j] - base[j]) * w[(c, j)];
                assert!((ig.signed[j] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn single_step_uses_gradient_at_input() {
        let m = init_mlp(5, 3, 8).unwrap();
        let x = point(5, 5);
        let base = vec![0.0; 5];
        let ig = integrated_gradients(&m, &x, &base, 1).unwrap();
        let g = m.input_gradient(&Matrix::from_vec(1, 5, x.clone()).unwrap()).unwrap();
        for j in 0..5 {
            assert!((ig.signed[j] - x[j] * g[(0, j)]).abs() < 1e-14);
        }
    }

    #[test]
    fn completeness_at_high_resolution() {
        let m = init_mlp(5, 3, 9).unwrap();
        for s in 0..5 {
            let x = point(10 + s, 5);
            let base = vec![0.0; 5];
            let ig = integrated_gradients(&m, &x, &base, 2048).unwrap();
            let fx = m.logits(&x).unwrap()[ig.class];
            let fb = m.logits(&base).unwrap()[ig.class];
            let sum: f64 = ig.signed.iter().sum();
            assert!((sum - (fx - fb)).abs() < 1e-3 * fx.abs().max(1.0));
        }
    }
}
