//! `daepca`: synthesize data, train monitors, detect faults, evaluate and
//! benchmark from the command line.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::DetectArgs;
use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "daepca", version, about = "Nonlinear process monitoring with DAE-PCA")]
struct Cli {
    /// TOML run configuration; the bundled default is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (for `synth`, defaults to the configured data dir).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth,
    /// Fit the configured method and write the model and training report.
    Train {
        /// Dataset directory; overrides the configuration.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a sequence with a saved model; writes a statistics CSV and SVG.
    Detect {
        /// Model written by `train` (.dpca container or baseline .json).
        #[arg(long)]
        model: PathBuf,
        /// Headed CSV of samples to score.
        #[arg(long, conflicts_with = "fault")]
        input: Option<PathBuf>,
        /// Score this test set of the dataset instead.
        #[arg(long)]
        fault: Option<u32>,
        /// Fault onset, for the plot marker and FDR/FAR.
        #[arg(long)]
        onset: Option<usize>,
        /// Dataset directory for --fault; overrides the configuration.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Repeated trials over every test set; writes FDR/FAR tables.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Time online scoring of the configured methods.
    Bench {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config,
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let out = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    match cli.command {
        Command::Synth => {
            let out = cli.out_dir.unwrap_or_else(|| cfg.data.dir.clone());
            commands::synth(&cfg, cli.seed, &out)
        }
        Command::Train { data } => commands::train(&cfg, seed, data.as_deref(), &out),
        Command::Detect {
            model,
            input,
            fault,
            onset,
            data,
        } => commands::detect(
            &cfg,
            DetectArgs {
                model: &model,
                input: input.as_deref(),
                fault,
                onset,
                data: data.as_deref(),
            },
            &out,
        ),
        Command::Eval { data } => commands::eval(&cfg, seed, data.as_deref(), &out),
        Command::Bench { data } => commands::bench(&cfg, seed, data.as_deref(), &out),
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>()
            || matches!(
                c.downcast_ref::<daepca::Error>(),
                Some(daepca::Error::InvalidConfig(_))
            )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
