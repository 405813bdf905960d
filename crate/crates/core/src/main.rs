//! Command-line entry point: run experiments, sweep the exploration
//! coefficient, or validate a dataset pipeline, all from a JSON config.

use std::error::Error as StdError;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cascade_bandits::runner::{self, ExperimentConfig, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "cascade-bandits", version, about = "Cascading bandit simulator and exposure benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured (algorithm x seed) grid and write result CSVs.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Rerun both variants of every configured algorithm kind across a
    /// range of exploration coefficients.
    Sweep {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated exploration coefficients.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0, 5.0])]
        c: Vec<f64>,
    },
    /// Load, filter, binarize, split, and featurize the dataset, then
    /// report its shape without simulating.
    ValidateData {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> cascade_bandits::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> cascade_bandits::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let summary = runner::run_experiment(&cfg)?;
            println!("algorithm             unbiased  c      seed  IC      SC      UIC     G       regret");
            for r in &summary.rows {
                println!(
                    "{:<21} {:<9} {:<6} {:<5} {:<7.4} {:<7.4} {:<7.4} {:<7.4} {:.4}",
                    r.algorithm,
                    r.unbiased,
                    r.c,
                    r.seed,
                    r.item_coverage,
                    r.supplier_coverage,
                    r.user_item_coverage,
                    r.gini,
                    r.regret_final
                );
            }
            println!("wrote {}", summary.output_dir.display());
        }
        Command::Sweep { config, c } => {
            let cfg = load_config(&config)?;
            let sweep = runner::sweep_exploration(&cfg, &c)?;
            println!("algorithm             c      IC_orig  IC_unb   regret_orig  regret_unb");
            for r in &sweep.rows {
                println!(
                    "{:<21} {:<6} {:<8.4} {:<8.4} {:<12.4} {:.4}",
                    r.algorithm,
                    r.c,
                    r.ic_original,
                    r.ic_unbiased,
                    r.regret_original,
                    r.regret_unbiased
                );
            }
            println!("wrote {}", cfg.output_dir.join("sweep.csv").display());
        }
        Command::ValidateData { config } => {
            let cfg = load_config(&config)?;
            let report = runner::validate_data(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut cause = err.source();
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            ExitCode::FAILURE
        }
    }
}
