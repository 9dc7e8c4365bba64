use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spectator_cli::run::{self, Options};

/// Simulator and analysis toolkit for spectator-qubit feed-forward protocols.
#[derive(Parser)]
#[command(name = "spectator", version, about)]
struct Cli {
    /// Sectioned key=value configuration file (defaults reproduce the
    /// published operating point).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the configured RNG seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output directory for CSV files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Sweep axis override as `start:stop:count` (mG for amp-sweep, Hz for
    /// freq-sweep and phase-map).
    #[arg(long, global = true, value_name = "SPEC")]
    points: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the RMS tone amplitude at the resonant frequency.
    AmpSweep,
    /// Sweep the tone frequency at fixed RMS amplitude.
    FreqSweep,
    /// Tabulate grid-averaged phases and data/spectator phase ratios per frequency.
    PhaseMap,
    /// Print the noise-free feed-forward gain factor.
    Gain,
    /// Fit a model (cosine | stretched-exp | ramsey | logistic-reload) to a two-column CSV.
    Fit {
        model: String,
        input: PathBuf,
    },
    /// Fit a bimodal Poisson model to a `count,frequency` histogram CSV.
    Histogram {
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options { config: cli.config, seed: cli.seed, out: cli.out, points: cli.points };
    let result = match &cli.command {
        Command::AmpSweep => run::amp_sweep(&opts),
        Command::FreqSweep => run::freq_sweep(&opts),
        Command::PhaseMap => run::phase_map(&opts),
        Command::Gain => run::gain(&opts),
        Command::Fit { model, input } => run::fit(&opts, model, input),
        Command::Histogram { input } => run::histogram(&opts, input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
