//! Runs an experiment described by a TOML file through the library API and
//! writes its reports.
//!
//! ```text
//! cargo run --release --example run_config -- configs/smoke.toml
//! ```

use agop_ixg::experiment::{run_roar_experiment, run_synthetic_benchmark, ExperimentConfig, ExperimentKind, ModelCache};

fn main() -> agop_ixg::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/smoke.toml".into());
    let config = ExperimentConfig::load(&path)?;
    let mut cache = ModelCache::in_memory();
    let written = match config.kind {
        ExperimentKind::Synthetic => {
            let results = run_synthetic_benchmark(&config, &mut cache)?;
            for row in &results.table {
                println!("{:<12} {:<18} spearman {:?}", row.dataset, row.label, row.spearman_mean);
            }
            results.write(&config, &config.output_dir)?
        }
        ExperimentKind::Roar => {
            let results = run_roar_experiment(&config, &mut cache)?;
            for row in &results.auc_table {
                println!("{:<12} {:<18} AUC {:.4}", row.dataset, row.label, row.auc_mean);
            }
            results.write(&config, &config.output_dir)?
        }
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
