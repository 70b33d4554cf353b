//! AGOP-IxG: input-times-gradient on a gradient projected through the rank-K
//! truncated average gradient outer product of the training set.

use super::{finish, SampleAttribution};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eig, truncate_rank};
use crate::matrix::{gemm, Matrix, Op};
use crate::nn::Mlp;

pub const DEFAULT_REL_THRESHOLD: f64 = 0.01;
const FIT_CHUNK: usize = 1024;

/// The d x K factor `F` with `F Fᵀ = M_K`, plus what it was fitted from.
#[derive(Debug, Clone, PartialEq)]
pub struct AgopFilter {
    pub factor: Matrix,
    pub eigenvalues_retained: Vec<f64>,
    pub rel_threshold: f64,
    pub baseline: Vec<f64>,
    pub fit_sample_count: usize,
}

impl AgopFilter {
    /// Filter from an explicit factor, e.g. the identity.
    pub fn from_factor(factor: Matrix, baseline: Vec<f64>) -> Result<Self> {
        if factor.rows() != baseline.len() {
            return Err(Error::Shape(format!(
                "factor has {} rows, baseline {} entries",
                factor.rows(),
                baseline.len()
            )));
        }
        Ok(Self {
            eigenvalues_retained: vec![f64::NAN; factor.cols()],
            factor,
            rel_threshold: f64::NAN,
            baseline,
            fit_sample_count: 0,
        })
    }

    pub fn rank(&self) -> usize {
        self.factor.cols()
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// `(g F) Fᵀ` by two thin products; `M_K` is never formed.
    pub fn filter_gradient(&self, g: &[f64]) -> Vec<f64> {
        let alpha = self.factor.vecmat(g);
        let f = &self.factor;
        (0..f.rows()).map(|i| crate::matrix::dot(f.row(i), &alpha)).collect()
    }

    /// Applies [`filter_gradient`](Self::filter_gradient) to every row of `grads`.
    pub fn filter_gradients(&self, grads: &Matrix) -> Matrix {
        let mut alpha = Matrix::zeros(grads.rows(), self.rank());
        gemm(1.0, grads, Op::N, &self.factor, Op::N, 0.0, &mut alpha).expect("shapes");
        let mut out = Matrix::zeros(grads.rows(), self.dim());
        gemm(1.0, &alpha, Op::N, &self.factor, Op::T, 0.0, &mut out).expect("shapes");
        out
    }

    /// The explicit `d x d` matrix `M_K = F Fᵀ`.
    pub fn truncated_agop(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim(), self.dim());
        gemm(1.0, &self.factor, Op::N, &self.factor, Op::T, 0.0, &mut m).expect("shapes");
        m
    }
}

/// `M = (1/n) Σ g_i g_iᵀ` over max-logit input gradients of `train_x`.
pub fn gradient_outer_product(model: &Mlp, train_x: &Matrix) -> Result<Matrix> {
    let d = train_x.cols();
    let n = train_x.rows();
    if n == 0 {
        return Err(Error::Shape("cannot fit AGOP on an empty matrix".into()));
    }
    let mut m = Matrix::zeros(d, d);
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(FIT_CHUNK) {
        let g = model.input_gradient(&train_x.select_rows(chunk))?;
        gemm(1.0 / n as f64, &g, Op::T, &g, Op::N, 1.0, &mut m)?;
    }
    Ok(m)
}

pub fn fit_agop(model: &Mlp, train_x: &Matrix) -> Result<AgopFilter> {
    fit_agop_with_threshold(model, train_x, DEFAULT_REL_THRESHOLD)
}

/// Eigendecomposes the AGOP and keeps eigenpairs above `rel_threshold * λ_max`.
/// The baseline is the column mean of `train_x`.
pub fn fit_agop_with_threshold(model: &Mlp, train_x: &Matrix, rel_threshold: f64) -> Result<AgopFilter> {
    let m = gradient_outer_product(model, train_x)?;
    let eig = symmetric_eig(&m)?;
    let t = truncate_rank(&eig, rel_threshold)?;
    Ok(AgopFilter {
        factor: t.factor,
        eigenvalues_retained: t.eigenvalues,
        rel_threshold,
        baseline: train_x.column_means(),
        fit_sample_count: train_x.rows(),
    })
}

/// `e_j = (x_j - x'_j) (g M_K)_j` with `g` the max-logit gradient at `x`, normalized.
pub fn agop_ixg(filter: &AgopFilter, model: &Mlp, x: &[f64]) -> Result<SampleAttribution> {
    let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(agop_ixg_batch(filter, model, &batch)?.remove(0))
}

pub fn agop_ixg_batch(filter: &AgopFilter, model: &Mlp, rows: &Matrix) -> Result<Vec<SampleAttribution>> {
    if filter.dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "filter fitted for d = {}, model takes d = {}",
            filter.dim(),
            model.input_dim()
        )));
    }
    let g = model.input_gradient(rows)?;
    let filtered = filter.filter_gradients(&g);
    rows.row_iter()
        .zip(filtered.row_iter())
        .map(|(x, ga)| finish(x.iter().zip(&filter.baseline).zip(ga).map(|((xj, bj), gj)| (xj - bj) * gj).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::normalize_attribution;
    use crate::nn::{init_mlp, Layer};
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, "agop-test");
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn identity_filter_is_shifted_input_x_gradient() {
        let model = init_mlp(6, 3, 1).unwrap();
        let baseline = vec![0.1, -0.2, 0.0, 0.3, 0.0, 0.05];
        let filter = AgopFilter::from_factor(Matrix::identity(6), baseline.clone()).unwrap();
        let x = random(10, 6, 2);
        let got = agop_ixg_batch(&filter, &model, &x).unwrap();
        let g = model.input_gradient(&x).unwrap();
        for i in 0..10 {
            let raw: Vec<f64> = (0..6).map(|j| (x[(i, j)] - baseline[j]) * g[(i, j)]).collect();
            let want = normalize_attribution(&raw).unwrap();
            assert!(got[i].values.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn two_path_product_agrees() {
        let f = random(20, 4, 3);
        let filter = AgopFilter::from_factor(f, vec![0.0; 20]).unwrap();
        let m_k = filter.truncated_agop();
        let grads = random(100, 20, 4);
        let batched = filter.filter_gradients(&grads);
        for i in 0..100 {
            let two_step = filter.filter_gradient(grads.row(i));
            let dense = m_k.vecmat(grads.row(i));
            for j in 0..20 {
                assert!((two_step[j] - dense[j]).abs() < 1e-10);
                assert!((batched[(i, j)] - dense[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_model_rank_is_bounded_by_classes() {
        let w = random(3, 8, 5);
        let model = Mlp::from_layers(vec![Layer::new(w, vec![0.0; 3]).unwrap()]).unwrap();
        let filter = fit_agop(&model, &random(500, 8, 6)).unwrap();
        assert!(filter.rank() >= 1 && filter.rank() <= 3);
        let again = fit_agop(&model, &random(500, 8, 6)).unwrap();
        assert_eq!(filter, again);
    }

    #[test]
    fn baseline_input_is_zero_attribution() {
        let model = init_mlp(5, 3, 2).unwrap();
        let filter = fit_agop(&model, &random(64, 5, 1)).unwrap();
        let a = agop_ixg(&filter, &model, &filter.baseline.clone()).unwrap();
        assert!(a.zero);
        assert!(a.values.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn all_zero_gradients_are_degenerate() {
        let model = Mlp::from_layers(vec![Layer::new(Matrix::zeros(3, 4), vec![1.0, 0.0, 0.0]).unwrap()]).unwrap();
        assert!(matches!(fit_agop(&model, &random(10, 4, 1)), Err(Error::DegenerateSpectrum(_))));
    }
}
