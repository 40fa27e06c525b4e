use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use surjkit::cli;

#[derive(Parser)]
#[command(name = "surjkit", version, about = "Continuous surjections R^m -> R^n: traces, evaluation and coverage certificates")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the depth-K Hilbert cell centers as CSV (t,x,y).
    Trace {
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = surjkit::curve::DEFAULT_TRACE_CAP)]
        max_depth: u32,
    },
    /// Evaluate the pipeline of a spec file at a point.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated coordinates, decimal or `<mantissa>p<exponent>`.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Certify coverage of the spec's box and write a JSON report.
    Certify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match args.command {
        Command::Trace { depth, out, max_depth } => cli::trace(depth, &out, max_depth),
        Command::Eval { spec, point } => cli::eval(&spec, &point),
        Command::Certify { spec, report, budget, seed } => cli::certify(&spec, &report, budget, seed),
    };
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    let _ = std::io::stdout().flush();
    ExitCode::from(outcome.exit.code() as u8)
}
