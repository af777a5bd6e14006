mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "encgan", version, about = "Encoder-GAN anomaly detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, env = "ENCGAN_CONFIG")]
    config: Option<PathBuf>,
    /// Run directory; every output goes here.
    #[arg(long, env = "ENCGAN_OUT")]
    out: PathBuf,
    /// Overrides the seeds in the configuration.
    #[arg(long, env = "ENCGAN_SEED")]
    seed: Option<u64>,
    /// Parallel sweep cells.
    #[arg(long, env = "ENCGAN_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Build a contaminated training stream and a labeled test split.
    GenData(Common),
    /// Train on a dataset directory; writes checkpoints and the training log.
    Train(Common),
    /// Score a labeled split or image folder against a checkpoint.
    Score(Common),
    /// ROC/AUC from a scores file or a checkpoint plus dataset.
    Evaluate(Common),
    /// Contamination and loss-ablation grid.
    Sweep(Common),
    /// Render markdown and SVG summaries of a run directory.
    Report(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(c) => commands::gen_data(config::load(c.config.as_deref())?, &c.out, c.seed),
        Command::Train(c) => commands::train(config::load(c.config.as_deref())?, &c.out, c.seed),
        Command::Score(c) => commands::score(config::load(c.config.as_deref())?, &c.out),
        Command::Evaluate(c) => commands::evaluate(config::load(c.config.as_deref())?, &c.out),
        Command::Sweep(c) => commands::sweep(config::load(c.config.as_deref())?, &c.out, c.seed, c.jobs),
        Command::Report(c) => commands::report(&c.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
