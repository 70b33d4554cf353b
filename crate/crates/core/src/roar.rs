//! Remove-and-retrain: mask the globally top-ranked features with their training
//! means, retrain from scratch, and track how fast test accuracy falls.

use crate::attribution::{Explainer, MethodKind, MethodParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{init_mlp, train, Mlp, TrainConfig};
use crate::rng;
use rand::seq::{index::sample, SliceRandom};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.0, 0.05, 0.10, 0.20, 0.30, 0.50];
pub const LIME_RANKING_ROWS: usize = 500;

/// Features by mean attribution, descending; ties go to the lower index.
pub fn global_ranking(values: &Matrix) -> Vec<usize> {
    let means = values.column_means();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    order
}

/// `round(fraction * d)`, halves rounding up.
pub fn masked_count(fraction: f64, d: usize) -> usize {
    ((fraction * d as f64) + 0.5).floor().min(d as f64) as usize
}

/// Replaces the first `masked_count(fraction, d)` ranked columns of both
/// splits with the training-split column mean.
pub fn mask_features(train: &Dataset, test: &Dataset, ranking: &[usize], fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("masking fraction must lie in [0, 1], got {fraction}")));
    }
    let d = train.num_features();
    let means = train.x.column_means();
    let mut tr = train.clone();
    let mut te = test.clone();
    for &j in &ranking[..masked_count(fraction, d)] {
        tr.x.set_column(j, means[j]);
        te.x.set_column(j, means[j]);
    }
    Ok((tr, te))
}

/// Where a global ranking comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingSource {
    Method(MethodKind),
    /// Mean ground-truth attribution; only for synthetic data.
    GroundTruth,
    Random,
}

impl RankingSource {
    pub fn id(self) -> &'static str {
        match self {
            RankingSource::Method(m) => m.id(),
            RankingSource::GroundTruth => "ground_truth",
            RankingSource::Random => "random",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RankingSource::Method(m) => m.label(),
            RankingSource::GroundTruth => "Ground truth",
            RankingSource::Random => "Random",
        }
    }
}

impl std::str::FromStr for RankingSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground_truth" => Ok(RankingSource::GroundTruth),
            "random" => Ok(RankingSource::Random),
            other => other.parse().map(RankingSource::Method),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoarCurve {
    pub method: String,
    pub dataset: String,
    /// Ascending, starting at 0.
    pub fractions: Vec<f64>,
    pub masked_features: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `accuracies[f][s]` for fraction `f` and seed `s`.
    pub accuracies: Vec<Vec<f64>>,
    pub rankings: Vec<Vec<usize>>,
    pub auc_per_seed: Vec<f64>,
    pub auc_mean: f64,
    pub auc_std: f64,
}

impl RoarCurve {
    pub fn accuracy_at(&self, fraction: f64, seed_index: usize) -> Option<f64> {
        self.fractions.iter().position(|&f| f == fraction).map(|i| self.accuracies[i][seed_index])
    }
}

/// Trapezoid area under `(fraction, accuracy)` over `[0, 0.5]`.
pub fn roar_auc(fractions: &[f64], accuracies: &[f64]) -> Result<f64> {
    if fractions.len() != accuracies.len() {
        return Err(Error::Shape(format!("{} fractions, {} accuracies", fractions.len(), accuracies.len())));
    }
    let has = |f: f64| fractions.iter().any(|&x| (x - f).abs() < 1e-12);
    if !has(0.0) || !has(0.5) {
        return Err(Error::IncompleteCurve(format!("fractions {fractions:?} must include 0 and 0.5")));
    }
    let mut pts: Vec<(f64, f64)> =
        fractions.iter().copied().zip(accuracies.iter().copied()).filter(|&(f, _)| f <= 0.5 + 1e-12).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoarConfig {
    pub sources: Vec<RankingSource>,
    pub fractions: Vec<f64>,
    pub train: TrainConfig,
    pub methods: MethodParams,
    pub lime_ranking_rows: usize,
    /// All training rows when unset.
    pub shapley_ranking_rows: Option<usize>,
}

impl Default for RoarConfig {
    fn default() -> Self {
        Self {
            sources: MethodKind::ALL.into_iter().map(RankingSource::Method).collect(),
            fractions: DEFAULT_FRACTIONS.to_vec(),
            train: TrainConfig::default(),
            methods: MethodParams::default(),
            lime_ranking_rows: LIME_RANKING_ROWS,
            shapley_ranking_rows: None,
        }
    }
}

impl RoarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("ROAR needs at least one ranking source".into()));
        }
        if self.fractions.first() != Some(&0.0) || self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("fractions must ascend from 0, got {:?}", self.fractions)));
        }
        if self.fractions.iter().any(|&f| f > 1.0) {
            return Err(Error::Config("fractions must not exceed 1".into()));
        }
        self.train.validate()
    }
}

/// One seed of a ROAR experiment: the splits and the model trained on them.
#[derive(Debug, Clone)]
pub struct RoarRun {
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
    pub model: Mlp,
}

/// Non-deterministic side information, kept out of the curves.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RoarTimings {
    /// `(source, seed, seconds)` spent computing each ranking.
    pub ranking_seconds: Vec<(String, u64, f64)>,
    pub retrain_seconds: f64,
}

pub fn ranking_for(source: RankingSource, run: &RoarRun, config: &RoarConfig) -> Result<Vec<usize>> {
    let d = run.train.num_features();
    match source {
        RankingSource::Random => {
            let mut order: Vec<usize> = (0..d).collect();
            order.shuffle(&mut rng::stream(run.seed, "roar-random-ranking"));
            Ok(order)
        }
        RankingSource::GroundTruth => {
            let gt = run.train.ground_truth.as_ref().ok_or_else(|| {
                Error::Config(format!("dataset `{}` has no ground truth to rank by", run.train.name))
            })?;
            Ok(global_ranking(gt))
        }
        RankingSource::Method(method) => {
            let explainer = Explainer::prepare(method, &run.model, &run.train.x, &config.methods, run.seed)?;
            let n = run.train.len();
            let limit = match method {
                MethodKind::Lime => Some(config.lime_ranking_rows),
                MethodKind::SampledShapley => config.shapley_ranking_rows,
                _ => None,
            };
            let mut rows: Vec<usize> = (0..n).collect();
            if let Some(limit) = limit.filter(|&l| l < n) {
                let tag = format!("roar-{}-rows", method.id());
                rows = sample(&mut rng::stream(run.seed, &tag), n, limit).into_vec();
                rows.sort_unstable();
            }
            let attr = explainer.attribute(&run.train.x.select_rows(&rows), &rows);
            Ok(global_ranking(&attr.values))
        }
    }
}

/// Accuracy of a fresh model trained on `train` with `ranking`'s top
/// `fraction` of features masked.
pub fn retrain_masked(
    train_ds: &Dataset,
    test_ds: &Dataset,
    ranking: &[usize],
    fraction: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64> {
    let (tr, te) = mask_features(train_ds, test_ds, ranking, fraction)?;
    let model = init_mlp(tr.num_features(), tr.num_classes, seed)?;
    let model = train(model, &tr.x, &tr.y, &cfg.clone().with_seed(seed))?;
    model.accuracy(&te.x, &te.y)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt())
}

/// Runs every `(source, fraction, seed)` cell. Fraction 0 reuses each run's
/// original model accuracy.
pub fn run_roar(config: &RoarConfig, runs: &[RoarRun]) -> Result<(Vec<RoarCurve>, RoarTimings)> {
    config.validate()?;
    let first = runs.first().ok_or_else(|| Error::Config("ROAR needs at least one seed".into()))?;
    let d = first.train.num_features();
    let baseline: Vec<f64> =
        runs.iter().map(|r| r.model.accuracy(&r.test.x, &r.test.y)).collect::<Result<_>>()?;
    let mut timings = RoarTimings::default();
    let mut curves = Vec::new();
    for &source in &config.sources {
        let mut accuracies = vec![vec![0.0; runs.len()]; config.fractions.len()];
        let mut rankings = Vec::new();
        for (s, run) in runs.iter().enumerate() {
            let start = Instant::now();
            let ranking = ranking_for(source, run, config)
                .map_err(|e| e.context(format!("ranking {} seed {}", source.id(), run.seed)))?;
            timings.ranking_seconds.push((source.id().into(), run.seed, start.elapsed().as_secs_f64()));
            let start = Instant::now();
            for (f, &fraction) in config.fractions.iter().enumerate() {
                accuracies[f][s] = if fraction == 0.0 {
                    baseline[s]
                } else {
                    let cell_seed = rng::derive_seed(run.seed, &format!("roar:{}:{fraction}", source.id()));
                    retrain_masked(&run.train, &run.test, &ranking, fraction, &config.train, cell_seed).map_err(|e| {
                        e.context(format!("{} fraction {fraction} seed {}", source.id(), run.seed))
                    })?
                };
            }
            timings.retrain_seconds += start.elapsed().as_secs_f64();
            rankings.push(ranking);
        }
        let auc_per_seed: Vec<f64> = (0..runs.len())
            .map(|s| {
                let acc: Vec<f64> = accuracies.iter().map(|row| row[s]).collect();
                roar_auc(&config.fractions, &acc)
            })
            .collect::<Result<_>>()?;
        let (auc_mean, auc_std) = mean_std(&auc_per_seed);
        curves.push(RoarCurve {
            method: source.id().into(),
            dataset: first.train.name.clone(),
            fractions: config.fractions.clone(),
            masked_features: config.fractions.iter().map(|&f| masked_count(f, d)).collect(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            accuracies,
            rankings,
            auc_per_seed,
            auc_mean,
            auc_std,
        });
    }
    Ok((curves, timings))
}

/// One `(method, dataset, fraction, masked, seed, accuracy)` row per cell.
pub fn write_curves_csv(curves: &[RoarCurve], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "dataset", "fraction", "masked_features", "seed", "accuracy"])?;
    for c in curves {
        for (f, &fraction) in c.fractions.iter().enumerate() {
            for (s, &seed) in c.seeds.iter().enumerate() {
                w.write_record([
                    c.method.clone(),
                    c.dataset.clone(),
                    fraction.to_string(),
                    c.masked_features[f].to_string(),
                    seed.to_string(),
                    c.accuracies[f][s].to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitTag;
    use proptest::prelude::*;

    fn tiny(x: Matrix, y: Vec<usize>) -> Dataset {
        let d = x.cols();
        Dataset {
            name: "tiny".into(),
            split: SplitTag::Train,
            seed: 0,
            feature_names: crate::data::default_feature_names(d),
            baseline: x.column_means(),
            x,
            y,
            num_classes: 2,
            informative_mask: None,
            ground_truth: None,
            degenerate: Vec::new(),
            standardization: None,
        }
    }

    #[test]
    fn ranking_ties_and_single_rows() {
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(global_ranking(&m), vec![0, 1]);
        let one = Matrix::from_rows(&[vec![0.1, 0.5, 0.0, 0.4]]).unwrap();
        assert_eq!(global_ranking(&one), vec![1, 3, 0, 2]);
    }

    #[test]
    fn masked_counts() {
        assert_eq!(masked_count(0.05, 20), 1);
        assert_eq!(masked_count(0.25, 20), 5);
        assert_eq!(masked_count(0.5, 20), 10);
        assert_eq!(masked_count(0.05, 104), 5);
        assert_eq!(masked_count(0.3, 23), 7);
        assert_eq!(masked_count(0.1, 15), 2);
        assert_eq!(masked_count(1.0, 7), 7);
    }

    #[test]
    fn masking_uses_train_means() {
        let train = tiny(Matrix::from_rows(&[vec![1.0, 5.0, 0.0], vec![3.0, 7.0, 1.0]]).unwrap(), vec![0, 1]);
        let test = tiny(Matrix::from_rows(&[vec![10.0, 10.0, 10.0]]).unwrap(), vec![0]);
        let (a, b) = mask_features(&train, &test, &[1, 0, 2], 0.0).unwrap();
        assert_eq!((a.x.clone(), b.x.clone()), (train.x.clone(), test.x.clone()));
        let (a, b) = mask_features(&train, &test, &[1, 0, 2], 0.34).unwrap();
        assert_eq!(a.x.column(1), vec![6.0, 6.0]);
        assert_eq!(b.x.row(0), &[10.0, 6.0, 10.0]);
        assert_eq!(a.x.column(0), train.x.column(0));
        assert!(mask_features(&train, &test, &[0, 1, 2], 1.5).is_err());
    }

    #[test]
    fn fully_masked_model_predicts_the_majority() {
        let n = 120;
        let x = Matrix::from_fn(n, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let y: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        let train = tiny(x.clone(), y.clone());
        let acc = retrain_masked(&train, &train, &[0, 1, 2], 1.0, &TrainConfig::default().with_epochs(30), 1).unwrap();
        assert!((acc - train.majority_rate()).abs() < 1e-12, "{acc}");
    }

    #[test]
    fn auc_fixtures() {
        let f = DEFAULT_FRACTIONS;
        assert!((roar_auc(&f, &[0.8; 6]).unwrap() - 0.40).abs() < 1e-15);
        let lin: Vec<f64> = f.iter().map(|x| 0.8 - 0.8 * x).collect();
        assert!((roar_auc(&f, &lin).unwrap() - 0.30).abs() < 1e-15);
        assert!(matches!(roar_auc(&[0.0, 0.3], &[0.5, 0.5]), Err(Error::IncompleteCurve(_))));
        assert!(matches!(roar_auc(&[0.05, 0.5], &[0.5, 0.5]), Err(Error::IncompleteCurve(_))));
    }

    proptest! {
        #[test]
        fn auc_of_constant_curve_is_half_the_level(a in 0.0f64..1.0) {
            prop_assert!((roar_auc(&DEFAULT_FRACTIONS, &[a; 6]).unwrap() - 0.5 * a).abs() < 1e-12);
        }

        #[test]
        fn auc_is_monotone(acc in prop::collection::vec(0.0f64..1.0, 6), drop in prop::collection::vec(0.0f64..0.5, 6)) {
            let lower: Vec<f64> = acc.iter().zip(&drop).map(|(a, d)| (a - d).max(0.0)).collect();
            prop_assert!(roar_auc(&DEFAULT_FRACTIONS, &lower).unwrap() <= roar_auc(&DEFAULT_FRACTIONS, &acc).unwrap() + 1e-15);
        }
    }

    #[test]
    fn sources_parse() {
        assert_eq!("random".parse::<RankingSource>().unwrap(), RankingSource::Random);
        assert_eq!("lime".parse::<RankingSource>().unwrap(), RankingSource::Method(MethodKind::Lime));
        assert!("nope".parse::<RankingSource>().is_err());
    }
}
