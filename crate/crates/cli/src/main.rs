mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Layers, RunConfig};

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERICAL: u8 = 4;

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: Self::DATA,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<wavelet_cf::Error> for CliError {
    fn from(e: wavelet_cf::Error) -> Self {
        let code = if e.is_config() {
            Self::CONFIG
        } else if e.is_numerical() {
            Self::NUMERICAL
        } else {
            Self::DATA
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "wavelet-cf",
    version,
    about = "Spectral wavelet collaborative filtering for implicit feedback"
)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReportFormat {
    Table,
    Lines,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter a raw interaction log and write the canonical dataset.
    Ingest {
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Eigendecompose the training graph and write the spectral cache.
    Spectral {
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Train a model, or search the learning rate and scale grid.
    Train {
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        spectral: Option<String>,
        #[arg(long)]
        output: Option<String>,
        /// Run every (learning_rate, t) pair and keep the best.
        #[arg(long)]
        grid: bool,
        /// Continue from the saved training state.
        #[arg(long, conflicts_with = "grid")]
        resume: bool,
        /// Stop after this many epochs, leaving the state for --resume.
        #[arg(long, value_name = "EPOCHS", conflicts_with = "grid")]
        stop_after: Option<usize>,
    },
    /// Report Recall@k and NDCG@k on the test split.
    Evaluate {
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        spectral: Option<String>,
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        /// Also report popularity and uniform random rankings.
        #[arg(long)]
        baselines: bool,
    },
    /// Top-k unseen items for the given users.
    Recommend {
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        spectral: Option<String>,
        #[arg(long)]
        checkpoint: Option<String>,
        /// External user ids, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        users: Vec<String>,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Retrain under each per-user training cap and report the trend.
    ColdStart {
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Write a synthetic block-structured dataset.
    Synth {
        #[arg(long)]
        output: Option<String>,
    },
    /// Print the effective configuration and every accepted key.
    Config,
}

fn layers(cli: &Cli) -> Result<Layers, CliError> {
    let mut layers = Layers::defaults();
    if let Some(path) = &cli.config {
        layers.apply_file(path)?;
    }
    layers.apply_env(std::env::vars())?;
    layers.apply_overrides(&cli.set)?;
    let flags: Vec<(&str, &Option<String>)> = match &cli.command {
        Command::Ingest { input, output } => vec![("input", input), ("dataset", output)],
        Command::Spectral { dataset, output } => vec![("dataset", dataset), ("spectral_cache", output)],
        Command::Train {
            dataset,
            spectral,
            output,
            ..
        } => vec![("dataset", dataset), ("spectral_cache", spectral), ("checkpoint", output)],
        Command::Evaluate {
            dataset,
            spectral,
            checkpoint,
            ..
        }
        | Command::Recommend {
            dataset,
            spectral,
            checkpoint,
            ..
        } => vec![("dataset", dataset), ("spectral_cache", spectral), ("checkpoint", checkpoint)],
        Command::ColdStart { dataset } => vec![("dataset", dataset)],
        Command::Synth { output } => vec![("dataset", output)],
        Command::Config => vec![],
    };
    for (key, value) in flags {
        if let Some(v) = value {
            layers.set(key, v.clone());
        }
    }
    Ok(layers)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let layers = layers(&cli)?;
    let cfg = RunConfig::from_layers(&layers)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot start {} threads: {e}", cfg.threads)))?;
    let force = cli.force;
    match cli.command {
        Command::Ingest { .. } => commands::ingest(&cfg, force),
        Command::Spectral { .. } => commands::spectral(&cfg, force),
        Command::Train {
            grid,
            resume,
            stop_after,
            ..
        } => commands::train(&cfg, grid, resume, force, stop_after),
        Command::Evaluate { format, baselines, .. } => commands::evaluate(&cfg, format, baselines),
        Command::Recommend { users, k, .. } => commands::recommend(&cfg, &users, k),
        Command::ColdStart { .. } => commands::cold_start(&cfg),
        Command::Synth { .. } => commands::synth(&cfg, force),
        Command::Config => {
            print!("{}", cfg.rendered);
            println!();
            for (key, default, doc) in config::KEYS {
                println!("# {key} (default {:?}): {doc}", default);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
