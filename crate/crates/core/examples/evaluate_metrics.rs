//! Scores one method against ground truth over the whole test set.
//!
//! ```text
//! cargo run --release --example evaluate_metrics -- interaction integrated_gradients
//! ```

use agop_ixg::attribution::{attribute_dataset, MethodKind, MethodParams};
use agop_ixg::data::{generate, SyntheticKind};
use agop_ixg::metrics::evaluate_method;
use agop_ixg::nn::{init_mlp, train, TrainConfig};

fn main() -> agop_ixg::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: SyntheticKind = args.next().as_deref().unwrap_or("interaction").parse()?;
    let method: MethodKind = args.next().as_deref().unwrap_or("agop_ixg").parse()?;
    let seed = 2;

    let data = generate(kind, seed)?;
    let config = TrainConfig::default().with_seed(seed).with_epochs(60);
    let model = train(init_mlp(data.train.num_features(), 3, seed)?, &data.train.x, &data.train.y, &config)?;
    let attr = attribute_dataset(method, &MethodParams::default(), &model, &data.train.x, &data.test.x, seed)?;
    let r = evaluate_method(&attr, &data.test, &model)?;
    println!("{} on {}", method.label(), kind.name());
    println!("  spearman     {:.4} (sd over samples {:.4})", r.spearman_mean, r.spearman_std_across_samples);
    println!("  top-k        {:.4}", r.topk_precision);
    println!("  noise mass   {:.4}", r.noise_mass);
    println!("  evaluated    {} (misclassified {}, degenerate {}, flagged {})", r.n_evaluated, r.n_excluded_misclassified, r.n_excluded_degenerate, r.n_excluded_flagged);
    println!("  wall time    {:.3} s", r.wall_time_seconds);
    Ok(())
}
