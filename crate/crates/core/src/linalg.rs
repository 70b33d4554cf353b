//! Symmetric eigendecomposition (cyclic Jacobi) and spectral truncation.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
const NOISE_FLOOR: f64 = 1e-14;

/// `M = V diag(λ) Vᵀ` with eigenvalues sorted descending and column `j` of
/// `eigenvectors` paired with `eigenvalues[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let d = self.dim();
        let v = &self.eigenvectors;
        Matrix::from_fn(d, d, |i, j| (0..d).map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)]).sum())
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(M + Mᵀ)/2` first. Iteration stops once the
/// off-diagonal Frobenius mass drops below `1e-12 * |M|_F`. Each eigenvector is
/// signed so that its largest-magnitude entry is positive.
pub fn symmetric_eig(m: &Matrix) -> Result<EigenDecomposition> {
    let (n, cols) = m.shape();
    if n != cols {
        return Err(Error::Shape(format!("symmetric_eig needs a square matrix, got {n}x{cols}")));
    }
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = Matrix::identity(n);
    let tolerance = OFF_DIAGONAL_TOLERANCE * a.frobenius();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= tolerance {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence { sweeps, off_diagonal: off });
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    for j in 0..n {
        let mut pivot = 0;
        for i in 1..n {
            if eigenvectors[(i, j)].abs() > eigenvectors[(pivot, j)].abs() {
                pivot = i;
            }
        }
        if eigenvectors[(pivot, j)] < 0.0 {
            for i in 0..n {
                eigenvectors[(i, j)] = -eigenvectors[(i, j)];
            }
        }
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Spectral factor of the retained subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFactor {
    /// `d x K`, column `k` is `v_k * sqrt(λ_k)`.
    pub factor: Matrix,
    pub eigenvalues: Vec<f64>,
}

impl TruncatedFactor {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Keeps the eigenpairs whose eigenvalue strictly exceeds `rel_threshold * λ_max`.
///
/// Eigenvalues below `1e-14 * λ_max` count as zero, so negative round-off is never kept.
pub fn truncate_rank(eig: &EigenDecomposition, rel_threshold: f64) -> Result<TruncatedFactor> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::Config(format!("rel_threshold must lie in (0, 1), got {rel_threshold}")));
    }
    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateSpectrum(lambda_max));
    }
    let cutoff = rel_threshold * lambda_max;
    let floor = NOISE_FLOOR * lambda_max;
    let retained: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .take_while(|&l| l >= floor && l > cutoff)
        .collect();
    let d = eig.dim();
    let factor = Matrix::from_fn(d, retained.len(), |i, k| eig.eigenvectors[(i, k)] * retained[k].sqrt());
    Ok(TruncatedFactor { factor, eigenvalues: retained })
}
