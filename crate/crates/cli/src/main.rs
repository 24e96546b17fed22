//! `concept-bridge`: train TopK SAEs on activation dumps and compare the
//! learned features across models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::ConfigFile;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or arguments: exit code 1.
    Usage(String),
    /// Unreadable, corrupt or degenerate data: exit code 2.
    Data(concept_bridge::Error),
}

impl From<concept_bridge::Error> for CliError {
    fn from(e: concept_bridge::Error) -> Self {
        CliError::Data(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "concept-bridge", version, about = "TopK SAEs and cross-model concept similarity")]
struct Cli {
    /// `key = value` file; flags override it, it overrides defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (default: CONCEPT_BRIDGE_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
pub struct TileArgs {
    #[arg(long)]
    pub tile_rows: Option<usize>,
    #[arg(long)]
    pub tile_cols: Option<usize>,
    #[arg(long)]
    pub inner_block: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a TopK SAE on an activation dump.
    Train(commands::TrainArgs),
    /// Record pre-TopK features of a global-only dump.
    Features(commands::FeaturesArgs),
    /// MPPC and wMPPC of source features against target features.
    Wmppc(commands::WmppcArgs),
    /// Layerwise wMPPC grid as heatmap CSV.
    Grid(commands::GridArgs),
    /// Pairwise Comparative Sharedness ranking.
    Sharedness(commands::SharednessArgs),
    /// Generalized Comparative Sharedness over two groups of models.
    Gcs(commands::GcsArgs),
    /// Fisher-z significance of a best-match correlation.
    Significance(commands::SignificanceArgs),
    /// wMPPC against a per-column shuffled target.
    ShuffleBaseline(commands::ShuffleArgs),
    /// FLOPs of one full feature correlation.
    Flops(commands::FlopsArgs),
    /// All-pairs wMPPC table as CSV and JSON.
    Report(commands::ReportArgs),
    /// Validate files and print their headers.
    Inspect(commands::InspectArgs),
    /// Write synthetic sparse-dictionary activations.
    Synth(commands::SynthArgs),
}

fn threads(cli_flag: Option<usize>, file: &ConfigFile) -> Result<Option<usize>, CliError> {
    let env = match std::env::var("CONCEPT_BRIDGE_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Usage(format!("CONCEPT_BRIDGE_THREADS={v:?}: {e}")))?,
        ),
        Err(_) => None,
    };
    let n = file.resolve_opt("threads", cli_flag)?.or(env);
    if n == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(n) = threads(cli.threads, &file)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => commands::train(a, &file),
        Command::Features(a) => commands::features(a, &file),
        Command::Wmppc(a) => commands::wmppc(a, &file),
        Command::Grid(a) => commands::grid(a, &file),
        Command::Sharedness(a) => commands::sharedness(a, &file),
        Command::Gcs(a) => commands::gcs(a, &file),
        Command::Significance(a) => commands::significance(a, &file),
        Command::ShuffleBaseline(a) => commands::shuffle_baseline(a, &file),
        Command::Flops(a) => commands::flops(a),
        Command::Report(a) => commands::report(a, &file),
        Command::Inspect(a) => commands::inspect(a),
        Command::Synth(a) => commands::synth(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
