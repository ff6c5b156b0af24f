//! `covbound` command-line tool.
//!
//! Every command prints one JSON document on stdout (or a CSV table with
//! `--csv`); diagnostics go to stderr. Exit status: 0 on success, 1 when a
//! verification check fails or the numerics break down, 2 on bad input.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use covbound::Error;
use serde::Serialize;
use serde_json::{json, Value};

use args::{Cli, Command};
use commands::Output;

#[derive(Serialize)]
struct ReportEnvelope<'a> {
    tool_version: &'static str,
    command: &'a str,
    profile_digest: Option<String>,
    timestamp: String,
    payload: Value,
}

/// Honours `SOURCE_DATE_EPOCH` so whole reports can be made reproducible.
fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Params(_) => "params",
        Command::Bounds(_) => "bounds",
        Command::Simulate(_) => "simulate",
        Command::Oracle(_) => "oracle",
        Command::Shapes(_) => "shapes",
        Command::Examples(_) => "examples",
        Command::Verify(_) => "verify",
        Command::Compare(_) => "compare",
    }
}

fn run(c: &Command) -> covbound::Result<Output> {
    match c {
        Command::Params(a) => commands::params(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Shapes(a) => commands::shapes(a),
        Command::Examples(a) => commands::examples(a),
        Command::Verify(a) => commands::verify(a),
        Command::Compare(a) => commands::compare(a),
    }
}

/// Write failures (a closed pipe, say) are ignored: there is nobody left to tell.
fn print_json(v: &impl Serialize) {
    let mut out = std::io::stdout().lock();
    if serde_json::to_writer_pretty(&mut out, v).is_ok() {
        let _ = writeln!(out);
    }
}

fn print_csv(table: &commands::Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()
}

fn error_object(kind: &str, message: &str, line: Option<usize>) -> Value {
    json!({ "error": { "kind": kind, "message": message, "line": line } })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            print_json(&error_object("usage", e.kind().as_str().unwrap_or("invalid arguments"), None));
            return ExitCode::from(2);
        }
    };
    let name = command_name(&cli.command);
    match run(&cli.command) {
        Ok(out) => {
            if cli.csv {
                if let Err(e) = print_csv(&out.table) {
                    eprintln!("covbound: cannot write CSV: {e}");
                    return ExitCode::from(1);
                }
            } else {
                print_json(&ReportEnvelope {
                    tool_version: env!("CARGO_PKG_VERSION"),
                    command: name,
                    profile_digest: out.digest,
                    timestamp: timestamp(),
                    payload: out.payload,
                });
            }
            if out.failed {
                eprintln!("covbound {name}: verification failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("covbound {name}: {e}");
            let line = match &e {
                Error::Format { line, .. } => *line,
                _ => None,
            };
            print_json(&error_object(e.kind(), &e.to_string(), line));
            match e {
                Error::Numeric { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
