use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use bargain::experiments::{self, Experiment, ExperimentConfig, OutputFormat};
use bargain::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Toy,
    Formation,
    Portfolio,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

/// Run a bargaining experiment described by a TOML config file.
#[derive(Debug, Parser)]
#[command(name = "bargain", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; results go to stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    let wanted = match cli.command {
        Command::Toy => Experiment::Toy,
        Command::Formation => Experiment::Formation,
        Command::Portfolio => Experiment::Portfolio,
    };
    match cfg.experiment {
        Some(e) if e != wanted => {
            return Err(Error::Config(format!(
                "{} describes a {} experiment",
                cli.config.display(),
                e.label()
            )))
        }
        _ => cfg.experiment = Some(wanted),
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(format) = cli.format {
        cfg.format = match format {
            Format::Jsonl => OutputFormat::Jsonl,
            Format::Csv => OutputFormat::Csv,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig) -> Result<(), Error> {
    let records = experiments::run(cfg)?;
    match &cfg.output {
        Some(path) => {
            for written in experiments::write_outputs(&records, path, cfg.format)? {
                log::info!("wrote {}", written.display());
            }
        }
        None => experiments::write_records(&records, cfg.format, BufWriter::new(io::stdout().lock()))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BARGAIN_LOG", "off")).init();
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| execute(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bargain: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
