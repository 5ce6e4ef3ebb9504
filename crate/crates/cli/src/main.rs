mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Kind;

#[derive(Parser, Debug)]
#[command(
    name = "crowdshield",
    version,
    about = "Early misinformation prediction from conversation threads"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// JSON run configuration (crowdshield-config/1).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; every component seed is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Corpus format: native or rumoureval.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Corpus path (native JSONL file or RumourEval directory).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// `{reply_id: bool}` claim annotations for RumourEval input.
    #[arg(long, global = true)]
    pub claim_sidecar: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub encoder: Option<EncoderArg>,
    /// Embedding service URL for the external encoder.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Refit the whole pipeline on truncated threads at each milestone.
    #[arg(long, global = true)]
    pub retrain_per_milestone: bool,
    /// Weight Q-features by alpha * c_j, zeroing non-claim positions.
    #[arg(long = "literal-eq12", global = true)]
    pub literal_eq12: bool,
    /// Upper bound on evaluation conditions run at once.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub parallel_conditions: Option<u64>,
    /// Saved Q-network.
    #[arg(long, global = true)]
    pub qnet: Option<PathBuf>,
    /// Saved classifier.
    #[arg(long, global = true)]
    pub clf: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderArg {
    Hashing,
    External,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a corpus to native JSONL.
    Ingest,
    /// Check every thread against the structural rules.
    Validate,
    /// Split, label, transition and stance-claim counts.
    Stats {
        /// Count transitions between consecutive posts instead of tree edges.
        #[arg(long)]
        chronological: bool,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        n_threads: Option<usize>,
    },
    /// Train the Q-network on the training split.
    TrainQ,
    /// Write per-thread Q-values at the annotated stances.
    ExportQ,
    /// Write fused feature vectors.
    Fuse,
    /// Train the veracity classifier from a saved Q-network.
    Train,
    /// Evaluate saved networks on the test split.
    Evaluate,
    /// Evaluate at early-detection milestones.
    EarlyDetect {
        /// Comma-separated reply counts; `all` for whole threads.
        #[arg(long, value_delimiter = ',')]
        milestones: Option<Vec<String>>,
    },
    /// Full model against the no_q and no_text ablations.
    Ablate,
    /// One train/evaluate cycle per claim weight.
    AlphaSweep {
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Cohen's kappa between two label files (one label per line).
    Kappa { a: PathBuf, b: PathBuf },
    /// Train, evaluate and write every artifact.
    Pipeline,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Kind::Usage as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match commands::run(&cli.global, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind as u8)
        }
    }
}
