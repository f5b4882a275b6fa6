//! `alphareg` command-line tool.
//!
//! Data go to stdout or `--output`; diagnostics go to stderr, errors as one
//! JSON object per line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Failure of a subcommand, printed as `{"error": kind, "message": ...}`.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: "usage", message: message.into() }
    }

    pub fn io(context: &str, e: impl std::fmt::Display) -> Self {
        Self { kind: "io", message: format!("{context}: {e}") }
    }
}

impl From<alphareg::Error> for CliError {
    fn from(e: alphareg::Error) -> Self {
        Self { kind: e.kind(), message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self { kind: "json", message: e.to_string() }
    }
}

fn report(e: &CliError) {
    let line = serde_json::json!({ "error": e.kind, "message": e.message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let text: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .collect();
            report(&CliError::usage(text.join(" ").trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            report(&CliError::usage("--threads must be >= 1"));
            return ExitCode::from(2);
        }
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            report(&CliError { kind: "threads", message: e.to_string() });
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(_) if commands::STDOUT_CLOSED.load(std::sync::atomic::Ordering::Relaxed) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}
