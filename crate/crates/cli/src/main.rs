use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use choquard_cli::config::Task;
use choquard_cli::{run, Invocation};

/// Solver and verification runs for the Choquard equation.
#[derive(Debug, Parser)]
#[command(name = "choquard", version)]
struct Args {
    /// Task to execute.
    #[arg(value_enum)]
    task: Task,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input field file (overrides the configuration).
    #[arg(long)]
    field: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let inv = Invocation {
        task: args.task,
        config: args.config,
        out: args.out,
        field: args.field,
    };
    let (code, report, path) = run(&inv);
    for e in &report.errors {
        eprintln!("choquard {}: {} ({})", report.task, e.message, e.kind);
    }
    println!("{}: {} -> {}", report.task, report.status, path.display());
    ExitCode::from(code as u8)
}
