//! Runs all five attribution methods on the same test rows and prints each
//! method's top features and cost per row.
//!
//! ```text
//! cargo run --release --example baselines -- linear 1
//! ```

use agop_ixg::attribution::{Explainer, MethodKind, MethodParams};
use agop_ixg::data::{generate, SyntheticKind};
use agop_ixg::metrics::top_k_indices;
use agop_ixg::nn::{init_mlp, train, TrainConfig};

fn main() -> agop_ixg::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: SyntheticKind = args.next().as_deref().unwrap_or("linear").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let data = generate(kind, seed)?;
    let config = TrainConfig::default().with_seed(seed).with_epochs(60);
    let model = train(init_mlp(data.train.num_features(), 3, seed)?, &data.train.x, &data.train.y, &config)?;
    let rows: Vec<usize> = (0..20).collect();
    let x = data.test.x.select_rows(&rows);
    let gt = data.test.ground_truth.as_ref().expect("ground truth");
    let k = kind.informative_count();
    println!("ground truth top-{k} of row 0: {:?}", top_k_indices(gt.row(0), k));

    let params = MethodParams::default();
    for method in MethodKind::ALL {
        let explainer = Explainer::prepare(method, &model, &data.train.x, &params, seed)?;
        let attr = explainer.attribute(&x, &rows);
        println!(
            "{:<18} top-{k} {:?}  {:.2} ms/row",
            method.label(),
            top_k_indices(attr.values.row(0), k),
            1e3 * attr.total_seconds() / rows.len() as f64
        );
    }
    Ok(())
}
