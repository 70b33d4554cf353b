//! Fully connected ReLU classifier with analytic input gradients.
//!
//! Layers are stored as `(out_dim, in_dim)` weight matrices. Every layer but
//! the last is followed by a ReLU whose derivative at exactly zero is taken to
//! be zero. All inference methods take `&self` and can share one model across
//! threads.

mod checkpoint;
mod train;

pub use checkpoint::{load_model, save_model, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train, train_accuracy, TrainConfig};

use crate::error::{Error, Result};
use crate::matrix::{gemm, Matrix, Op};
use crate::rng;
use rand::Rng as _;

/// Hidden widths of the benchmark classifier.
pub const HIDDEN_DIMS: [usize; 4] = [256, 256, 128, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>) -> Result<Self> {
        if weights.rows() != biases.len() {
            return Err(Error::Shape(format!(
                "layer has {} output rows but {} biases",
                weights.rows(),
                biases.len()
            )));
        }
        Ok(Self { weights, biases })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// `input · Wᵀ + b`.
    fn affine(&self, input: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(input.rows(), self.out_dim());
        for i in 0..out.rows() {
            out.row_mut(i).copy_from_slice(&self.biases);
        }
        gemm(1.0, input, Op::N, &self.weights, Op::T, 1.0, &mut out).expect("layer shapes checked at construction");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    pub seed: u64,
    pub train_epochs: usize,
    pub final_train_accuracy: Option<f64>,
}

/// Intermediate values kept by a forward pass for backpropagation.
pub(crate) struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`; the last entry is the logits.
    pub inputs: Vec<Matrix>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        self.inputs.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Builds a model from explicit layers, checking that adjacent dimensions chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("model needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {l} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    l + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, seed: 0, train_epochs: 0, final_train_accuracy: None })
    }

    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn with_dims(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Shape(format!("invalid layer dims {layer_dims:?}")));
        }
        let mut r = rng::stream(seed, "mlp-init");
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights = Matrix::from_fn(fan_out, fan_in, |_, _| r.random_range(-bound..bound));
                let biases = (0..fan_out).map(|_| r.random_range(-bound..bound)).collect();
                Layer { weights, biases }
            })
            .collect();
        let mut model = Self::from_layers(layers)?;
        model.seed = seed;
        Ok(model)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Layer::out_dim)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, batch: &Matrix) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        inputs.push(batch.clone());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(inputs.last().expect("non-empty"));
            if l != last {
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(z);
        }
        ForwardCache { inputs }
    }

    /// Logits for every row of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_batch(batch)?;
        let last = self.layers.len() - 1;
        let mut a = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.affine(&a);
            if l != last {
                a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Logits of a single input.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward(&batch)?.into_vec())
    }

    /// Argmax labels and max-softmax confidences.
    pub fn predict(&self, batch: &Matrix) -> Result<(Vec<usize>, Vec<f64>)> {
        let logits = self.forward(batch)?;
        Ok(logits.row_iter().map(|row| (argmax(row), softmax(row).into_iter().fold(0.0, f64::max))).unzip())
    }

    pub fn accuracy(&self, batch: &Matrix, labels: &[usize]) -> Result<f64> {
        let (pred, _) = self.predict(batch)?;
        Ok(accuracy(&pred, labels))
    }

    /// Propagates `d_logits` back to the input, returning per-layer parameter
    /// gradients (when requested) and the input gradient.
    pub(crate) fn backward(
        &self,
        cache: &ForwardCache,
        d_logits: Matrix,
        want_params: bool,
    ) -> (Vec<(Matrix, Vec<f64>)>, Matrix) {
        let mut grads = Vec::new();
        let mut delta = d_logits;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            if want_params {
                let mut dw = Matrix::zeros(layer.out_dim(), layer.in_dim());
                gemm(1.0, &delta, Op::T, input, Op::N, 0.0, &mut dw).expect("shapes");
                let mut db = vec![0.0; layer.out_dim()];
                for row in delta.row_iter() {
                    db.iter_mut().zip(row).for_each(|(b, d)| *b += d);
                }
                grads.push((dw, db));
            }
            let mut d_input = Matrix::zeros(delta.rows(), layer.in_dim());
            gemm(1.0, &delta, Op::N, &layer.weights, Op::N, 0.0, &mut d_input).expect("shapes");
            if l > 0 {
                // input of layer l is relu(z); zero derivative where the activation is not positive
                for (g, a) in d_input.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = d_input;
        }
        grads.reverse();
        (grads, delta)
    }

    /// Gradient of the chosen class logit for each row, along with that logit.
    pub fn class_score_gradient(&self, batch: &Matrix, classes: &[usize]) -> Result<(Vec<f64>, Matrix)> {
        self.check_batch(batch)?;
        if classes.len() != batch.rows() {
            return Err(Error::Shape(format!("{} classes for {} rows", classes.len(), batch.rows())));
        }
        let c = self.num_classes();
        if let Some(&bad) = classes.iter().find(|&&k| k >= c) {
            return Err(Error::Shape(format!("class {bad} out of range for {c} classes")));
        }
        let cache = self.forward_cached(batch);
        let logits = cache.logits();
        let scores = classes.iter().enumerate().map(|(i, &k)| logits[(i, k)]).collect();
        let mut seed = Matrix::zeros(batch.rows(), c);
        for (i, &k) in classes.iter().enumerate() {
            seed[(i, k)] = 1.0;
        }
        let (_, grad) = self.backward(&cache, seed, false);
        Ok((scores, grad))
    }

    /// Gradient of the maximum logit with respect to each input row, the
    /// predicted class being fixed at that row.
    pub fn input_gradient(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.predicted_gradient(batch)?.1)
    }

    /// Predicted classes and max-logit input gradients from one forward pass.
    pub fn predicted_gradient(&self, batch: &Matrix) -> Result<(Vec<usize>, Matrix)> {
        self.check_batch(batch)?;
        let cache = self.forward_cached(batch);
        let logits = cache.logits();
        let classes: Vec<usize> = logits.row_iter().map(argmax).collect();
        let mut seed = Matrix::zeros(batch.rows(), self.num_classes());
        for (i, &k) in classes.iter().enumerate() {
            seed[(i, k)] = 1.0;
        }
        let (_, grad) = self.backward(&cache, seed, false);
        Ok((classes, grad))
    }

    /// Pre-activations of every hidden unit for one input, for kink detection.
    pub fn hidden_preactivations(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
        self.check_batch(&batch)?;
        let mut out = Vec::new();
        let mut a = batch;
        for layer in &self.layers[..self.layers.len() - 1] {
            let z = layer.affine(&a);
            out.extend_from_slice(z.as_slice());
            a = z;
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(out)
    }
}

/// Benchmark classifier: `input_dim -> 256 -> 256 -> 128 -> 64 -> num_classes`.
pub fn init_mlp(input_dim: usize, num_classes: usize, seed: u64) -> Result<Mlp> {
    if input_dim == 0 || num_classes < 2 {
        return Err(Error::Shape(format!(
            "need input_dim >= 1 and num_classes >= 2, got {input_dim} and {num_classes}"
        )));
    }
    let mut dims = vec![input_dim];
    dims.extend_from_slice(&HIDDEN_DIMS);
    dims.push(num_classes);
    Mlp::with_dims(&dims, seed)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64
}
