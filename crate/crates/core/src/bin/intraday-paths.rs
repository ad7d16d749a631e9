use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use intraday_paths::pipeline::{run_command, Command, RunConfig, Workspace};
use intraday_paths::Error;

#[derive(Parser)]
#[command(
    version,
    about = "Intraday price path forecasts and strategy backtests"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Generate a synthetic market as CSV files.
    Synth,
    /// Aggregate transactions to VWAP grids and store them with fundamentals.
    Ingest,
    /// Fit path models for every test day.
    Fit,
    /// Forecast paths and build scenario ensembles.
    Forecast,
    /// Trade the configured strategies on the stored ensembles.
    Backtest,
    /// Calibrate strategy hyperparameters on the calibration days.
    Gridsearch,
    /// Forecast and strategy metrics.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Ingest => Command::Ingest,
            Cmd::Fit => Command::Fit,
            Cmd::Forecast => Command::Forecast,
            Cmd::Backtest => Command::Backtest,
            Cmd::Gridsearch => Command::Gridsearch,
            Cmd::Report => Command::Report,
        }
    }
}

fn run(cli: Cli) -> Result<usize, Error> {
    let path = cli.config.ok_or_else(|| Error::Config {
        key: "--config".into(),
        message: "a config file is required".into(),
    })?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("--threads: {e}")))?;
    }
    let manifest = run_command(cli.command.into(), &cfg, &Workspace::new(out))?;
    Ok(manifest.outputs.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = Command::from(cli.command).name();
    match run(cli) {
        Ok(n) => {
            eprintln!("{name}: wrote {n} artifacts");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
