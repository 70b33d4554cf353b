use super::report::RoarAucRow;
use super::{load_raw, splits_for, ExperimentConfig, ModelCache};
use crate::error::Result;
use crate::roar::{run_roar, RoarCurve, RoarRun, RoarTimings};

#[derive(Debug, Clone)]
pub struct RoarResults {
    pub curves: Vec<RoarCurve>,
    pub auc_table: Vec<RoarAucRow>,
    /// Per dataset, in config order.
    pub timings: Vec<(String, RoarTimings)>,
    /// `(dataset, error)` for datasets that could not be completed.
    pub failures: Vec<(String, String)>,
}

impl RoarResults {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn curve(&self, dataset: &str, method: &str) -> Option<&RoarCurve> {
        self.curves.iter().find(|c| c.dataset == dataset && c.method == method)
    }
}

/// Runs ROAR for every configured dataset. A dataset that fails is recorded
/// and the others still run.
pub fn run_roar_experiment(config: &ExperimentConfig, cache: &mut ModelCache) -> Result<RoarResults> {
    config.validate()?;
    let train_cfg = config.effective_train();
    let mut curves = Vec::new();
    let mut timings = Vec::new();
    let mut failures = Vec::new();
    for &dataset in &config.datasets {
        let outcome = (|| -> Result<(Vec<RoarCurve>, RoarTimings)> {
            let raw = match dataset.synthetic() {
                Some(_) => None,
                None => Some(load_raw(dataset, &config.data)?),
            };
            let mut runs = Vec::new();
            for &seed in &config.seeds {
                let s = splits_for(dataset, seed, raw.as_ref(), &config.desk_scale)?;
                let key = ModelCache::key(&s.cache_stem, seed, &train_cfg);
                let model = cache.get_or_train(&key, &s.train, &train_cfg, seed)?;
                runs.push(RoarRun { seed, train: s.train, test: s.test, model });
            }
            let roar_cfg = config.roar_config(dataset.synthetic().is_some());
            log::info!("{}: ROAR over {} sources", dataset.name(), roar_cfg.sources.len());
            run_roar(&roar_cfg, &runs)
        })();
        match outcome {
            Ok((c, t)) => {
                curves.extend(c);
                timings.push((dataset.name().to_string(), t));
            }
            Err(e) => {
                log::error!("{}: {e}", dataset.name());
                failures.push((dataset.name().to_string(), e.to_string()));
            }
        }
    }
    let auc_table = super::report::auc_table(&curves);
    Ok(RoarResults { curves, auc_table, timings, failures })
}
