//! Fits the AGOP filter on a trained model and compares AGOP-IxG with plain
//! input-times-gradient on a handful of test rows.
//!
//! ```text
//! cargo run --release --example agop_attribution -- sparse 0
//! ```

use agop_ixg::attribution::{agop_ixg, fit_agop, input_x_gradient};
use agop_ixg::data::{generate, SyntheticKind};
use agop_ixg::metrics::{noise_mass, spearman};
use agop_ixg::nn::{init_mlp, train, TrainConfig};

fn main() -> agop_ixg::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: SyntheticKind = args.next().as_deref().unwrap_or("sparse").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let data = generate(kind, seed)?;
    let config = TrainConfig::default().with_seed(seed).with_epochs(60);
    let model = train(init_mlp(data.train.num_features(), 3, seed)?, &data.train.x, &data.train.y, &config)?;
    let filter = fit_agop(&model, &data.train.x)?;
    println!("{}: K = {} of {} directions kept", kind.name(), filter.rank(), filter.dim());

    let gt = data.test.ground_truth.as_ref().expect("synthetic data has ground truth");
    let mask = data.test.informative_mask.as_ref().expect("synthetic data has a mask");
    println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "row", "rho AGOP", "rho IxG", "noise AGOP", "noise IxG");
    for i in 0..8 {
        let x = data.test.x.row(i);
        let a = agop_ixg(&filter, &model, x)?.values;
        let b = input_x_gradient(&model, x)?.values;
        let rho = |v: &[f64]| spearman(gt.row(i), v).map(|r| format!("{r:.3}")).unwrap_or_else(|| "n/a".into());
        println!("{i:>4} {:>12} {:>12} {:>12.3} {:>12.3}", rho(&a), rho(&b), noise_mass(&a, mask), noise_mass(&b, mask));
    }
    Ok(())
}
