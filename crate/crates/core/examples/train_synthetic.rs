//! Trains the benchmark MLP on one synthetic dataset and reports accuracy and
//! the AGOP truncation rank.
//!
//! ```text
//! cargo run --release --example train_synthetic -- sparse 42 200
//! ```

use agop_ixg::attribution::fit_agop;
use agop_ixg::data::{generate, SyntheticKind};
use agop_ixg::nn::{init_mlp, train, TrainConfig};
use std::time::Instant;

fn main() -> agop_ixg::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: SyntheticKind = args.next().as_deref().unwrap_or("linear").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);

    let data = generate(kind, seed)?;
    let config = TrainConfig::default().with_seed(seed).with_epochs(epochs);
    let start = Instant::now();
    let model = train(init_mlp(data.train.num_features(), 3, seed)?, &data.train.x, &data.train.y, &config)?;
    let elapsed = start.elapsed().as_secs_f64();

    let filter = fit_agop(&model, &data.train.x)?;
    println!("dataset      {}", kind.name());
    println!("seed         {seed}");
    println!("epochs       {epochs} ({elapsed:.1} s)");
    println!("train acc    {:.4}", model.final_train_accuracy.unwrap_or(f64::NAN));
    println!("test acc     {:.4}", model.accuracy(&data.test.x, &data.test.y)?);
    println!("label flips  {:.4}", data.label_flip_rate);
    println!("AGOP rank K  {}", filter.rank());
    println!("spectrum     {:?}", filter.eigenvalues_retained.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
    Ok(())
}
