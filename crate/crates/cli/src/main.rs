//! `rieszlab`: kernels, circulant algebra, sampling and analysis for the
//! circular Riesz gas.
//!
//! Exit codes: 0 ok, 2 usage or configuration, 3 numerical, 4 I/O, 5 a
//! declared check failed.

mod cmd;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::FileConfig;
use failure::CliResult;

#[derive(Debug, Parser)]
#[command(name = "rieszlab", version, about = "Circular Riesz gas: kernel, circulant algebra, Monte Carlo and estimators")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "RIESZLAB_THREADS")]
    threads: Option<usize>,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate g_s and its first two derivatives.
    Kernel(cmd::kernel::KernelArgs),
    /// Riesz matrix inversion, decay fits and related checks.
    Matrix(cmd::matrix::MatrixArgs),
    /// Run the Metropolis sampler.
    Sample(cmd::sample::SampleArgs),
    /// Estimators over a sample file.
    Analyze(cmd::analyze::AnalyzeArgs),
    /// Run a verification suite.
    Verify(cmd::verify::VerifyArgs),
}

fn init_threads(cli: &Cli, file: &FileConfig) -> CliResult<usize> {
    let n = cli
        .threads
        .or(file.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(failure::Failure::usage("--threads must be at least 1"));
    }
    // Fails only when a pool already exists, which cannot happen here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(n)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let threads = init_threads(&cli, &file)?;
    match cli.command {
        Command::Kernel(a) => cmd::kernel::run(a, &file),
        Command::Matrix(a) => cmd::matrix::run(a, &file, threads),
        Command::Sample(a) => cmd::sample::run(a, &file, threads),
        Command::Analyze(a) => cmd::analyze::run(a, &file, threads),
        Command::Verify(a) => cmd::verify::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp_secs().init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
