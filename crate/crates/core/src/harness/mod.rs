//! Command-line orchestration: dataset generation, training, evaluation,
//! reporting.

pub mod config;
pub mod csvio;
pub mod eval;
pub mod gen;
pub mod report;
pub mod train;

pub use config::{ExperimentConfig, PatternKind, PatternSpec, Split};
pub use eval::{cmd_eval, recovered_subbands, roc_auc, sensing_roc_points, EvalTask};
pub use gen::cmd_gen;
pub use report::cmd_report;
pub use train::{cmd_train, coset_record_to_input, subband_samples_of_record, TrainTask};

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("training diverged at epoch {epoch}, step {step} (loss {loss})")]
    Diverged { epoch: usize, step: u64, loss: f64 },
    #[error("CSV schema: {0}")]
    Schema(String),
    #[error("conflicting config hashes in {file}: {hashes:?}")]
    ConflictingHashes { file: String, hashes: Vec<String> },
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Coset(#[from] crate::coset::CosetError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Inspect(#[from] crate::inspect::InspectError),
}

#[derive(Parser)]
#[command(
    name = "specsniff",
    about = "Multiband spectrum sniffing from sub-Nyquist multi-coset samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test datasets from a scenario config.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a generated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Task: sensor | identifier | decoder
        #[arg(long)]
        which: TrainTask,
        /// Directory holding train.mcds / val.mcds / pattern.txt.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate models / algorithms and emit CSV reports.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Task: sensing | recovery | identify | decode
        #[arg(long)]
        which: EvalTask,
        /// Trained model file (required for sensing).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge run directories into one report with plots.
    Report {
        /// Run directories containing CSV outputs.
        #[arg(long, required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn run() -> Result<(), HarnessError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { config, seed, out } => {
            let config = load_config(&config, seed)?;
            let outcome = cmd_gen(&config, &out)?;
            for (split, path, count) in outcome.files {
                println!("{:?}: {} frames -> {}", split, count, path.display());
            }
        }
        Command::Train { config, seed, which, data, out } => {
            let config = load_config(&config, seed)?;
            let outcome = cmd_train(&config, which, &data, &out)?;
            println!(
                "trained {} epochs, best val loss {}, model {}",
                outcome.epochs_run,
                outcome.best_val_loss,
                outcome.model_path.display()
            );
            if let (Some(fa), Some(md)) = (outcome.final_fa, outcome.final_md) {
                println!("validation FA {fa:.4} MD {md:.4}");
            }
        }
        Command::Eval { config, seed, which, model, out } => {
            let config = load_config(&config, seed)?;
            let outcome = cmd_eval(&config, which, model.as_deref(), &out)?;
            for f in outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Report { runs, out } => {
            let outcome = cmd_report(&runs, &out)?;
            for f in outcome.merged.iter().chain(&outcome.plots) {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

/// Binary entry point: exit code 0 on success, nonzero with a
/// machine-readable JSON error line on stderr otherwise.
pub fn cli_main() {
    if let Err(e) = run() {
        eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
        std::process::exit(1);
    }
}
