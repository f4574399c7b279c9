//! `mvts`: encode series into binary vision tensors, check the quantization
//! theory, and train and evaluate forecasters in the vision space.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{MsSetting, Overrides};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::validation(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<mvts_core::Error> for CliError {
    fn from(e: mvts_core::Error) -> Self {
        use mvts_core::Error::*;
        match e {
            NoSignChange { .. } | Divergence { .. } => CliError::numeric(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mvts", version, about = "Binary vision time-series toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where a command writes its files.
#[derive(Debug, Clone, clap::Args)]
struct OutputArgs {
    /// Output file; defaults to a fixed name inside the output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Output directory; defaults to $MVTS_OUTPUT_DIR, then ./out.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Vary {
    Ms,
    H,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepModeArg {
    Codec,
    Persistence,
    Reference,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpaceArg {
    S,
    V,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Sine,
    Gaussian,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a CSV series into an MVTS tensor file.
    Encode {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        h: usize,
        /// Maximum scale, or "auto".
        #[arg(long, value_parser = MsSetting::parse)]
        ms: MsSetting,
        /// Treat the first column as a timestamp (auto-detected when omitted).
        #[arg(long)]
        timestamp: Option<bool>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Decode an MVTS tensor file back to a CSV series of bin midpoints.
    Decode {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        h: usize,
        #[arg(long, value_parser = MsSetting::parse)]
        ms: MsSetting,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Render one channel of an MVTS tensor file as a plain PBM bitmap.
    Render {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Print the maximum scale minimizing the error bound for `h`.
    SolveMs {
        #[arg(long)]
        h: usize,
        #[arg(long, default_value_t = mvts_core::sme::DEFAULT_MS_TOLERANCE)]
        tol: f64,
    },
    /// Print the roundtrip error bound (per element unless a series shape is given).
    Bound {
        #[arg(long)]
        h: usize,
        #[arg(long, value_parser = MsSetting::parse)]
        ms: MsSetting,
        #[arg(long, requires = "steps")]
        channels: Option<usize>,
        #[arg(long, requires = "channels")]
        steps: Option<usize>,
    },
    /// Optimal scale and bound for h in {50, 100, 200, 400, 800}.
    Table1 {
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte-Carlo roundtrip error on standard-normal data against the bound.
    VerifySme {
        #[arg(long)]
        h: usize,
        #[arg(long, value_parser = MsSetting::parse)]
        ms: MsSetting,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bound along an increasing resolution schedule at fixed scale.
    CheckConvergence {
        #[arg(long)]
        ms: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [50usize, 100, 200, 400, 800])]
        h: Vec<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Train the reference network; writes a checkpoint and the loss curve.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Forecast the horizon following the last lookback rows of a CSV.
    Predict {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Checkpoint; required for the reference predictor.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Input CSV; defaults to the configured dataset.
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Score the configured predictor, persistence and the codec floor on the test split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SpaceArg::S)]
        space: SpaceArg,
    },
    /// MAE over a grid of maximum scales or resolutions.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        vary: Vary,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_enum, default_value_t = SweepModeArg::Codec)]
        mode: SweepModeArg,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write a seeded synthetic dataset as CSV.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        /// Sine period in steps.
        #[arg(long, default_value_t = 48.0)]
        period: f64,
        /// Sine noise standard deviation.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| commands::run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
