//! Remove-and-retrain on the linear dataset with ground-truth, random and
//! AGOP-IxG rankings.
//!
//! ```text
//! cargo run --release --example roar_synthetic
//! ```

use agop_ixg::attribution::{MethodKind, MethodParams};
use agop_ixg::data::{generate, SyntheticKind};
use agop_ixg::nn::{init_mlp, train, TrainConfig};
use agop_ixg::roar::{run_roar, RankingSource, RoarConfig, RoarRun};

fn main() -> agop_ixg::Result<()> {
    let train_cfg = TrainConfig::default().with_epochs(30);
    let mut runs = Vec::new();
    for seed in [0, 1] {
        let data = generate(SyntheticKind::Linear, seed)?;
        let model = train(init_mlp(20, 3, seed)?, &data.train.x, &data.train.y, &train_cfg.clone().with_seed(seed))?;
        runs.push(RoarRun { seed, train: data.train, test: data.test, model });
    }
    let config = RoarConfig {
        sources: vec![RankingSource::GroundTruth, RankingSource::Random, RankingSource::Method(MethodKind::AgopIxg)],
        fractions: vec![0.0, 0.1, 0.25, 0.5],
        train: train_cfg,
        methods: MethodParams::default(),
        lime_ranking_rows: 500,
        shapley_ranking_rows: None,
    };
    let (curves, _) = run_roar(&config, &runs)?;
    println!("majority rate {:.3}", runs[0].test.majority_rate());
    for c in &curves {
        let mean: Vec<String> = c.accuracies.iter().map(|a| format!("{:.3}", a.iter().sum::<f64>() / a.len() as f64)).collect();
        println!("{:<14} AUC {:.4} ± {:.4}  accuracy {}", c.method, c.auc_mean, c.auc_std, mean.join(" "));
    }
    Ok(())
}
