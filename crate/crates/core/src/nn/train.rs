use super::{accuracy, Mlp};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Minibatch Adam on softmax cross-entropy. No schedule, no weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 256,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Stable 64-bit fingerprint, used to key model caches.
    pub fn fingerprint(&self) -> u64 {
        let text = format!(
            "{:e}|{}|{}|{:e}|{:e}|{:e}|{}",
            self.learning_rate, self.epochs, self.batch_size, self.adam_beta1, self.adam_beta2, self.adam_eps, self.seed
        );
        rng::derive_seed(0, &text)
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    step: i32,
    // one (weights, biases) pair per layer
    state: Vec<(Moments, Moments)>,
}

impl Adam {
    fn new(model: &Mlp, cfg: &TrainConfig) -> Self {
        let zeros = |n: usize| Moments { m: vec![0.0; n], v: vec![0.0; n] };
        Self {
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            lr: cfg.learning_rate,
            step: 0,
            state: model
                .layers()
                .iter()
                .map(|l| (zeros(l.weights.as_slice().len()), zeros(l.biases.len())))
                .collect(),
        }
    }

    fn update(&mut self, model: &mut Mlp, grads: &[(Matrix, Vec<f64>)]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let apply = |params: &mut [f64], grad: &[f64], mom: &mut Moments| {
            for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut mom.m).zip(&mut mom.v) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for ((layer, (dw, db)), (mw, mb)) in model.layers_mut().iter_mut().zip(grads).zip(&mut self.state) {
            apply(layer.weights.as_mut_slice(), dw.as_slice(), mw);
            apply(&mut layer.biases, db, mb);
        }
    }
}

/// Mean softmax cross-entropy of `logits` and its gradient with respect to them.
fn cross_entropy(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let n = logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (i, row) in logits.row_iter().enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - row[labels[i]];
        for (j, &v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            grad[(i, j)] = (p - if j == labels[i] { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

/// Row order for one epoch; a pure function of `(seed, epoch, n)`.
pub(crate) fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::indexed_stream(seed, "shuffle", epoch as u64));
    order
}

/// Trains `model` in place for `config.epochs` epochs and records the final
/// training accuracy. Zero epochs returns the model unchanged.
pub fn train(mut model: Mlp, train_x: &Matrix, train_y: &[usize], config: &TrainConfig) -> Result<Mlp> {
    config.validate()?;
    if train_x.cols() != model.input_dim() {
        return Err(Error::Shape(format!(
            "training matrix has {} columns, model expects {}",
            train_x.cols(),
            model.input_dim()
        )));
    }
    if train_x.rows() != train_y.len() || train_y.is_empty() {
        return Err(Error::Shape(format!("{} rows but {} labels", train_x.rows(), train_y.len())));
    }
    let classes = model.num_classes();
    if let Some(&bad) = train_y.iter().find(|&&y| y >= classes) {
        return Err(Error::Shape(format!("label {bad} out of range for {classes} classes")));
    }
    if config.epochs == 0 {
        return Ok(model);
    }

    let mut adam = Adam::new(&model, config);
    for epoch in 0..config.epochs {
        let order = epoch_order(config.seed, epoch, train_x.rows());
        for chunk in order.chunks(config.batch_size) {
            let xb = train_x.select_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let cache = model.forward_cached(&xb);
            let (loss, d_logits) = cross_entropy(cache.logits(), &yb);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            let (grads, _) = model.backward(&cache, d_logits, true);
            adam.update(&mut model, &grads);
        }
    }
    model.train_epochs += config.epochs;
    model.final_train_accuracy = Some(train_accuracy(&model, train_x, train_y)?);
    Ok(model)
}

pub fn train_accuracy(model: &Mlp, x: &Matrix, y: &[usize]) -> Result<f64> {
    let (pred, _) = model.predict(x)?;
    Ok(accuracy(&pred, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_mlp, Layer};
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut r = rng::stream(seed, "blobs");
        let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let x = Matrix::from_fn(n, 4, |i, j| {
            let centre = if j == y[i] { 2.5 } else { 0.0 };
            let e: f64 = StandardNormal.sample(&mut r);
            centre + e * 0.5
        });
        (x, y)
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = Matrix::from_rows(&[vec![0.3, -1.0, 2.0], vec![1.0, 1.0, 1.0]]).unwrap();
        let labels = [2, 0];
        let (_, grad) = cross_entropy(&logits, &labels);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let mut up = logits.clone();
                let mut down = logits.clone();
                up[(i, j)] += h;
                down[(i, j)] -= h;
                let fd = (cross_entropy(&up, &labels).0 - cross_entropy(&down, &labels).0) / (2.0 * h);
                assert!((fd - grad[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut model = Mlp::with_dims(&[3, 5, 2], 1).unwrap();
        let (x, y) = {
            let (x, y) = blobs(6, 2);
            (Matrix::from_fn(6, 3, |i, j| x[(i, j)]), y.iter().map(|v| v % 2).collect::<Vec<_>>())
        };
        let cache = model.forward_cached(&x);
        let (_, d) = cross_entropy(cache.logits(), &y);
        let (grads, _) = model.backward(&cache, d, true);
        let h = 1e-6;
        for l in 0..2 {
            for idx in 0..model.layers()[l].weights.as_slice().len() {
                let orig = model.layers()[l].weights.as_slice()[idx];
                model.layers_mut()[l].weights.as_mut_slice()[idx] = orig + h;
                let up = cross_entropy(&model.forward(&x).unwrap(), &y).0;
                model.layers_mut()[l].weights.as_mut_slice()[idx] = orig - h;
                let down = cross_entropy(&model.forward(&x).unwrap(), &y).0;
                model.layers_mut()[l].weights.as_mut_slice()[idx] = orig;
                assert!(((up - down) / (2.0 * h) - grads[l].0.as_slice()[idx]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (x, y) = blobs(30, 1);
        let model = Mlp::with_dims(&[4, 8, 3], 3).unwrap();
        let out = train(model.clone(), &x, &y, &TrainConfig::default().with_epochs(0)).unwrap();
        assert_eq!(out, model);
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let (x, y) = blobs(300, 4);
        let cfg = TrainConfig { epochs: 30, batch_size: 32, learning_rate: 1e-2, ..Default::default() };
        let a = train(Mlp::with_dims(&[4, 16, 3], 5).unwrap(), &x, &y, &cfg).unwrap();
        let b = train(Mlp::with_dims(&[4, 16, 3], 5).unwrap(), &x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.final_train_accuracy.unwrap() > 0.95);
        assert_eq!(a.train_epochs, 30);
    }

    #[test]
    fn shuffle_depends_only_on_seed_and_epoch() {
        assert_eq!(epoch_order(3, 7, 100), epoch_order(3, 7, 100));
        assert_ne!(epoch_order(3, 7, 100), epoch_order(3, 8, 100));
        assert_ne!(epoch_order(3, 7, 100), epoch_order(4, 7, 100));
        let mut sorted = epoch_order(3, 7, 100);
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn divergence_reports_epoch() {
        let (x, y) = blobs(12, 1);
        let mut w = Matrix::zeros(3, 4);
        w[(0, 0)] = f64::INFINITY;
        let model = Mlp::from_layers(vec![Layer::new(w, vec![0.0; 3]).unwrap()]).unwrap();
        let err = train(model, &x, &y, &TrainConfig::default().with_epochs(3)).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { epoch: 0 }));
    }

    #[test]
    fn bad_labels_and_config_are_rejected() {
        let (x, mut y) = blobs(12, 1);
        let model = init_mlp(4, 3, 0).unwrap();
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(matches!(train(model.clone(), &x, &y, &bad), Err(Error::Config(_))));
        y[0] = 5;
        assert!(train(model, &x, &y, &TrainConfig::default()).is_err());
    }
}
