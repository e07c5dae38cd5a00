use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use warntriage_cli::{cmd_eval, cmd_label, cmd_mine, cmd_rank, cmd_train, PipelineConfig};

/// Mine git histories for acted-on static-analysis warnings, weak-label
/// them, and train a reranker that pushes likely real bugs to the top.
#[derive(Parser)]
#[command(name = "warntriage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Mine actionable and false warnings from a repository.
    Mine(Common),
    /// Weak-label mined warnings into the training dataset.
    Label(Common),
    /// Train the two-stage reranker and write a checkpoint.
    Train(Common),
    /// Rank dataset warnings by model score.
    Rank(Common),
    /// Evaluate ranking quality (nDCG@K, MRR, Recall@Top-K%).
    Eval {
        #[command(flatten)]
        common: Common,
        /// Evaluate an existing ranked list instead of the model.
        #[arg(long)]
        ranked: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig, warntriage_cli::CliError> {
    let mut config = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn run() -> Result<(), warntriage_cli::CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Mine(common) => cmd_mine(&load_config(common)?),
        Command::Label(common) => cmd_label(&load_config(common)?),
        Command::Train(common) => cmd_train(&load_config(common)?),
        Command::Rank(common) => cmd_rank(&load_config(common)?),
        Command::Eval { common, ranked } => {
            cmd_eval(&load_config(common)?, ranked.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("warntriage: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
