//! Command-line front end: `render`, `fit`, `edt`, `eval` and `bench`.
//!
//! Every command resolves a [`RunConfig`], echoes it to `<out_dir>/config.json`
//! and writes JSON reports, CSV curves and PGM rasters next to it.

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;

pub use commands::{
    cmd_bench, cmd_edt, cmd_eval, cmd_fit, cmd_render, BenchArgs, BenchReport, EdtArgs, EdtReport, EvalArgs, FitArgs,
    FitModeArg, RenderArgs,
};
pub use config::{ConfigArgs, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] gsmask::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Data(_) => EXIT_DATA,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(gsmask::Error::InvalidParameter { .. } | gsmask::Error::Config(_)) => EXIT_USAGE,
            CliError::Core(_) => EXIT_DATA,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gsmask",
    version,
    about = "Gaussian splat masks, level sets and segmentation metrics"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize one splat to a PGM.
    Render(RenderArgs),
    /// Fit a splat (and optionally a level set) to a target mask.
    Fit(FitArgs),
    /// Signed distance transform of a mask, stored as PGM plus JSON sidecar.
    Edt(EdtArgs),
    /// Segmentation metrics from masks or a (score, label) CSV.
    Eval(EvalArgs),
    /// Generate the synthetic shape suite, fit every shape and report per-family Dice.
    Bench(BenchArgs),
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.config)?;
    match &cli.command {
        Command::Render(a) => {
            let path = cmd_render(&cfg, a)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Fit(a) => {
            let r = cmd_fit(&cfg, a)?;
            eprintln!(
                "fit: {} epochs, converged {}, final loss {:.6}, target dice {}",
                r.epochs_run,
                r.converged,
                r.final_loss,
                r.target_dice.map_or("n/a".into(), |d| format!("{d:.4}"))
            );
        }
        Command::Edt(a) => {
            let r = cmd_edt(&cfg, a)?;
            eprintln!("edt: level set in [{:.3}, {:.3}]", r.min, r.max);
        }
        Command::Eval(a) => {
            let r = cmd_eval(&cfg, a)?;
            eprintln!("eval: dice {:.4} jaccard {:.4}", r.dice, r.jaccard);
        }
        Command::Bench(a) => {
            let r = cmd_bench(&cfg, a)?;
            for k in &r.kinds {
                eprintln!("bench {}: mean dice {:.4}", k.kind.name(), k.mean_dice);
            }
        }
    }
    Ok(())
}
