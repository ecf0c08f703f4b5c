use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcd_cli::config::Experiment;
use qcd_cli::{CliError, Options};

/// Quickest change detection experiments.
#[derive(Parser)]
#[command(name = "qcd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the control density drifts upward under every post-change member.
    CheckFamily(Args),
    /// Write FAR, CADD and PDC for every detector and threshold as CSV.
    Curve(Args),
    /// Compare the duty-cycle estimators of data-efficient detectors.
    Pdc(Args),
    /// Write the full metrics of every detector and threshold as JSON.
    Simulate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Stream CSV rows to standard output.
    #[arg(long)]
    stdout: bool,
}

type Action = fn(&Experiment, &Options, &mut dyn Write) -> Result<(), CliError>;

fn run(cmd: Command) -> Result<(), CliError> {
    let (args, action): (Args, Action) = match cmd {
        Command::CheckFamily(a) => (a, |exp, _, out| qcd_cli::check_family(exp, out)),
        Command::Curve(a) => (a, qcd_cli::curve),
        Command::Pdc(a) => (a, qcd_cli::pdc),
        Command::Simulate(a) => (a, qcd_cli::simulate),
    };
    let opts = Options {
        out: args.out,
        seed: args.seed,
        threads: args.threads,
        stdout: args.stdout,
    };
    let exp = qcd_cli::load(&args.config, &opts)?;
    action(&exp, &opts, &mut io::stdout().lock())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
