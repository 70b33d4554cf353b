//! Fidelity of an attribution matrix against known ground truth.

use crate::attribution::AttributionMatrix;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Mlp;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation. `None` when either vector is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "spearman needs equal lengths");
    if a.len() < 2 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Indices of the `k` largest entries; ties go to the lower index.
pub fn top_k_indices(v: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

pub fn top_k_precision(true_attr: &[f64], pred_attr: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= true_attr.len(), "k must be in 1..=d");
    let t = top_k_indices(true_attr, k);
    let p = top_k_indices(pred_attr, k);
    t.iter().filter(|i| p.contains(i)).count() as f64 / k as f64
}

/// Attribution mass on features outside the informative set.
pub fn noise_mass(pred_attr: &[f64], informative_mask: &[bool]) -> f64 {
    pred_attr.iter().zip(informative_mask).filter(|(_, &m)| !m).map(|(v, _)| v).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    pub spearman_mean: f64,
    pub spearman_std_across_samples: f64,
    pub topk_precision: f64,
    pub noise_mass: f64,
    pub n_evaluated: usize,
    pub n_excluded_misclassified: usize,
    pub n_excluded_degenerate: usize,
    pub n_excluded_flagged: usize,
    /// Evaluated rows left out of the Spearman mean because a vector was constant.
    pub n_spearman_undefined: usize,
    pub wall_time_seconds: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores `attr` against the ground truth of `dataset` on the rows the model
/// classifies correctly.
pub fn evaluate_method(attr: &AttributionMatrix, dataset: &Dataset, model: &Mlp) -> Result<MetricsReport> {
    let gt = dataset
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::Config(format!("dataset `{}` has no ground truth", dataset.name)))?;
    let mask = dataset.informative_mask.as_ref().expect("ground truth implies a mask");
    if attr.values.shape() != dataset.x.shape() {
        return Err(Error::Shape(format!(
            "attribution matrix {:?} does not match test set {:?}",
            attr.values.shape(),
            dataset.x.shape()
        )));
    }
    let k = mask.iter().filter(|&&m| m).count();
    let (pred, _) = model.predict(&dataset.x)?;

    let (mut misclassified, mut degenerate, mut flagged, mut undefined) = (0, 0, 0, 0);
    let mut rhos = Vec::new();
    let mut topk = Vec::new();
    let mut noise = Vec::new();
    for i in 0..dataset.len() {
        if pred[i] != dataset.y[i] {
            misclassified += 1;
            continue;
        }
        if dataset.degenerate[i] {
            degenerate += 1;
            continue;
        }
        if attr.flagged(i) {
            flagged += 1;
            continue;
        }
        let a = attr.values.row(i);
        let g = gt.row(i);
        match spearman(g, a) {
            Some(r) => rhos.push(r),
            None => undefined += 1,
        }
        topk.push(top_k_precision(g, a, k));
        noise.push(noise_mass(a, mask));
    }
    if topk.is_empty() {
        return Err(Error::EmptyEvaluation(format!(
            "{} on {}: no correctly classified, non-degenerate rows",
            attr.method.label(),
            dataset.name
        )));
    }
    let (spearman_mean, spearman_std) = if rhos.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&rhos) };
    Ok(MetricsReport {
        method: attr.method.id().into(),
        dataset: dataset.name.clone(),
        seed: dataset.seed,
        spearman_mean,
        spearman_std_across_samples: spearman_std,
        topk_precision: mean_std(&topk).0,
        noise_mass: mean_std(&noise).0,
        n_evaluated: topk.len(),
        n_excluded_misclassified: misclassified,
        n_excluded_degenerate: degenerate,
        n_excluded_flagged: flagged,
        n_spearman_undefined: undefined,
        wall_time_seconds: attr.total_seconds(),
    })
}

/// Appends reports to a CSV ledger, writing the header when the file is new.
/// Rows are keyed by `(dataset, method, seed)`.
pub fn append_ledger(path: impl AsRef<Path>, reports: &[MetricsReport]) -> Result<()> {
    let path = path.as_ref();
    let fresh = !path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<MetricsReport>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_fixtures() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn spearman_with_ties_matches_hand_ranks() {
        let ra = [1.0, 2.5, 2.5, 4.0];
        let rb = [1.0, 2.0, 3.5, 3.5];
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), ra);
        assert_eq!(average_ranks(&[1.0, 2.0, 3.0, 3.0]), rb);
        // centred ranks (-1.5, 0, 0, 1.5) and (-1.5, -0.5, 1, 1)
        let want = 3.75 / f64::sqrt(4.5 * 4.5);
        let got = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]).unwrap();
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }

    #[test]
    fn top_k_fixtures() {
        let a = [0.4, 0.3, 0.1, 0.1, 0.05, 0.05];
        let b = [0.3, 0.05, 0.4, 0.1, 0.1, 0.05];
        assert_eq!(top_k_indices(&a, 2), vec![0, 1]);
        assert_eq!(top_k_indices(&b, 2), vec![2, 0]);
        assert_eq!(top_k_precision(&a, &b, 2), 0.5);
        assert_eq!(top_k_precision(&a, &a, 3), 1.0);
        assert_eq!(top_k_precision(&[1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 1.0], 2), 0.0);
        assert_eq!(top_k_indices(&[0.25; 4], 2), vec![0, 1]);
    }

    #[test]
    fn noise_mass_fixtures() {
        let mut mask = vec![true; 5];
        mask.extend(vec![false; 15]);
        assert_eq!(noise_mass(&[0.2, 0.2, 0.2, 0.2, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &mask), 0.0);
        assert!((noise_mass(&[0.05; 20], &mask) - 0.75).abs() < 1e-15);
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 2..25)
    }

    proptest! {
        #[test]
        fn spearman_self_and_negation(a in vec_strategy()) {
            prop_assume!(a.iter().any(|&x| x != a[0]));
            let neg: Vec<f64> = a.iter().map(|x| -x).collect();
            prop_assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((spearman(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        }

        #[test]
        fn spearman_is_rank_invariant(a in vec_strategy(), b in vec_strategy()) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            let cubed: Vec<f64> = b.iter().map(|x| x.powi(3) + 5.0).collect();
            prop_assert_eq!(spearman(a, b).map(|r| (r * 1e9).round()), spearman(a, &cubed).map(|r| (r * 1e9).round()));
        }

        #[test]
        fn top_k_is_symmetric(a in vec_strategy(), b in vec_strategy(), k in 1usize..25) {
            let n = a.len().min(b.len());
            let k = k.min(n);
            prop_assert_eq!(top_k_precision(&a[..n], &b[..n], k), top_k_precision(&b[..n], &a[..n], k));
        }

        #[test]
        fn uniform_noise_mass_is_noise_share(mask in prop::collection::vec(any::<bool>(), 1..30)) {
            let d = mask.len();
            let uniform = vec![1.0 / d as f64; d];
            let want = mask.iter().filter(|&&m| !m).count() as f64 / d as f64;
            prop_assert!((noise_mass(&uniform, &mask) - want).abs() < 1e-12);
        }
    }
}
