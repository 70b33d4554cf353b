use agop_ixg::experiment::{
    emit_report, load_report, run_roar_experiment, run_synthetic_benchmark, ExperimentConfig, ExperimentKind, ModelCache,
    ReportFormat,
};
use agop_ixg::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "agop-bench", version, about = "Attribution benchmark and remove-and-retrain runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-truth benchmark on the synthetic datasets.
    Synthetic(RunArgs),
    /// Remove-and-retrain on synthetic or real data.
    Roar(RunArgs),
    /// Re-render the tables of a finished run.
    Report {
        /// Output directory of a previous run.
        dir: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Where to write; defaults to `dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the configured seeds; repeat for several.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Subsample real datasets to this many rows.
    #[arg(long)]
    desk_rows: Option<usize>,
    /// Train for this many epochs instead of the configured count.
    #[arg(long)]
    desk_epochs: Option<usize>,
    /// Directory for trained-model checkpoints.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => match kind {
                ExperimentKind::Synthetic => ExperimentConfig::synthetic(),
                ExperimentKind::Roar => ExperimentConfig::roar(),
            },
        };
        if config.kind != kind {
            return Err(agop_ixg::Error::Config(format!("config is for a {:?} run", config.kind)));
        }
        if let Some(o) = &self.out {
            config.output_dir = o.clone();
        }
        if !self.seeds.is_empty() {
            config.seeds = self.seeds.clone();
        }
        if self.desk_rows.is_some() {
            config.desk_scale.rows = self.desk_rows;
        }
        if self.desk_epochs.is_some() {
            config.desk_scale.epochs = self.desk_epochs;
        }
        if let Some(c) = &self.cache_dir {
            config.cache_dir = Some(c.clone());
        }
        Ok(config)
    }
}

fn cache_for(config: &ExperimentConfig) -> ModelCache {
    match &config.cache_dir {
        Some(d) => ModelCache::on_disk(d),
        None => ModelCache::in_memory(),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synthetic(args) => {
            let config = args.resolve(ExperimentKind::Synthetic)?;
            let results = run_synthetic_benchmark(&config, &mut cache_for(&config))?;
            for p in results.write(&config, &config.output_dir)? {
                println!("wrote {}", p.display());
            }
            Ok(results.all_succeeded())
        }
        Command::Roar(args) => {
            let config = args.resolve(ExperimentKind::Roar)?;
            let results = run_roar_experiment(&config, &mut cache_for(&config))?;
            for (dataset, error) in &results.failures {
                eprintln!("{dataset}: {error}");
            }
            if results.curves.is_empty() {
                return Ok(false);
            }
            for p in results.write(&config, &config.output_dir)? {
                println!("wrote {}", p.display());
            }
            Ok(results.all_succeeded())
        }
        Command::Report { dir, format, out } => {
            let report = load_report(&dir)?;
            for p in emit_report(&report, format, out.as_ref().unwrap_or(&dir))? {
                if format == ReportFormat::Markdown {
                    print!("{}", std::fs::read_to_string(&p).map_err(|e| agop_ixg::Error::io(&p, e))?);
                } else {
                    println!("wrote {}", p.display());
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
