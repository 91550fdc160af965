use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paoi_cli::{execute, summary, Mode};

#[derive(Parser)]
#[command(
    name = "paoi",
    version,
    about = "Peak age of information for priority queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact PAoI (exponential buffer-one systems, FCFS).
    Exact(Io),
    /// Upper bounds (buffer-one with shared service, LCFS; FCFS is exact).
    Bounds(Io),
    /// Simulation estimates with confidence intervals.
    Simulate(Io),
    /// Analytic values next to simulation, with their difference.
    Compare(Io),
    /// Priority order minimizing average FCFS PAoI.
    Advise(Io),
}

#[derive(Args)]
struct Io {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip the table on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (mode, io) = match cli.command {
        Command::Exact(io) => (Mode::Exact, io),
        Command::Bounds(io) => (Mode::Bounds, io),
        Command::Simulate(io) => (Mode::Simulate, io),
        Command::Compare(io) => (Mode::Compare, io),
        Command::Advise(io) => (Mode::Advise, io),
    };
    match execute(mode, &io.config, io.out.as_deref()) {
        Ok((path, outcome)) => {
            if !io.quiet {
                print!("{}", summary(&outcome));
            }
            eprintln!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("paoi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
