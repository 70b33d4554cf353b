//! Saves a trained model and its attributions, reloads both and checks that
//! nothing changed.
//!
//! ```text
//! cargo run --release --example checkpoint -- /tmp/agop-demo
//! ```

use agop_ixg::attribution::{attribute_dataset, export_attributions, import_attributions, MethodKind, MethodParams};
use agop_ixg::data::{generate, SyntheticKind};
use agop_ixg::nn::{init_mlp, load_model, save_model, train, TrainConfig};
use std::path::PathBuf;

fn main() -> agop_ixg::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/checkpoint-demo".into()));
    std::fs::create_dir_all(&dir).map_err(|e| agop_ixg::Error::io(&dir, e))?;
    let data = generate(SyntheticKind::Sparse, 3)?;
    let model = train(init_mlp(20, 3, 3)?, &data.train.x, &data.train.y, &TrainConfig::default().with_seed(3).with_epochs(20))?;

    let model_path = dir.join("sparse-seed3.bin");
    save_model(&model, &model_path)?;
    let reloaded = load_model(&model_path)?;
    assert_eq!(reloaded, model);
    println!("model round trip ok: {}", model_path.display());

    let params = MethodParams::default();
    let attr = attribute_dataset(MethodKind::AgopIxg, &params, &reloaded, &data.train.x, &data.test.x, 3)?;
    let attr_path = dir.join("sparse-agop.csv");
    export_attributions(&attr, &params, &attr_path)?;
    let (back, back_params) = import_attributions(&attr_path)?;
    assert_eq!(back.values, attr.values);
    assert_eq!(back_params, params);
    println!("attribution round trip ok: {} ({} rows)", attr_path.display(), back.values.rows());
    Ok(())
}
