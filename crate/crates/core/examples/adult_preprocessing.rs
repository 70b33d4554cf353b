//! Loads the UCI Adult files and prints what preprocessing kept.
//!
//! ```text
//! cargo run --release --example adult_preprocessing -- data/adult
//! ```

use agop_ixg::tabular::{load_adult, preprocess_adult};

fn main() -> agop_ixg::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/adult".into());
    let raw = load_adult(&dir)?;
    let (train, test, summary) = preprocess_adult(&raw, 0)?;
    println!("rows read      {}", summary.rows_read);
    println!("rows dropped   {}", summary.rows_dropped);
    println!("features       {} (expected {})", summary.features, summary.expected_features);
    println!("train / test   {} / {}", train.len(), test.len());
    println!("positive rate  {:.4}", train.y.iter().filter(|&&y| y == 1).count() as f64 / train.len() as f64);
    println!("first columns  {:?}", &train.feature_names[..8]);
    if let Some(w) = summary.warning {
        println!("warning        {w}");
    }
    Ok(())
}
