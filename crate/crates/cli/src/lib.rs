//! Batch front end: reads a JSON run configuration, executes one task and
//! writes `report.json`, traces and field files into an output directory.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field_io;
pub mod output;
pub mod sweep;
pub mod tasks;

use std::path::{Path, PathBuf};

use config::{RunConfig, Task};
use error::{CliError, EXIT_OTHER};
use output::{write_json, Report};
use tasks::{execute, Context, REPORT_FILE};

pub const DEFAULT_OUTPUT_DIR: &str = "choquard-out";

/// One command-line invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub task: Task,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub field: Option<PathBuf>,
}

/// Runs the invocation and returns the process exit code. The report is
/// written even when the configuration cannot be loaded.
pub fn run(inv: &Invocation) -> (i32, Report, PathBuf) {
    let mut report = Report::new(inv.task.name());
    let loaded = RunConfig::load(&inv.config);
    let out = inv
        .out
        .clone()
        .or_else(|| loaded.as_ref().ok().and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let outcome = loaded.and_then(|cfg| {
        if let Some(t) = cfg.task {
            if t != inv.task {
                return Err(CliError::Config(format!(
                    "config names task {} but {} was requested",
                    t.name(),
                    inv.task.name()
                )));
            }
        }
        let field = inv.field.clone().or_else(|| cfg.field.clone());
        let ctx = Context {
            out: &out,
            field: field.as_deref(),
        };
        execute(inv.task, &cfg, &ctx, &mut report)
    });
    if let Err(e) = outcome {
        report.record_error(&e);
    }
    let path = out.join(REPORT_FILE);
    if let Err(e) = write_json(&path, &report) {
        eprintln!("choquard: {e}");
        return (EXIT_OTHER, report, path);
    }
    (report.exit_code, report, path)
}

/// Reads a `report.json` written by [`run`].
pub fn read_report(path: &Path) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
