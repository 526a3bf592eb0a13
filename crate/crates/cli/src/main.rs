//! `holonomy-lab`: batch front-end for the holonomy engine.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure, 4 tolerance failure.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holonomy_core::report::{error_json, seal};
use holonomy_core::HolonomyError;
use serde_json::{json, Value};

use commands::{Document, Failure, Outcome};
use config::{ConfigError, RawConfig, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_TOLERANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "holonomy-lab", version, about = "Adiabatic holonomies of kicked spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Suppress the summary line on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Compute W, B and M = W B around the configured loop.
    Holonomy,
    /// Track quasienergies along a sweep and emit CSV.
    Spectrum,
    /// Compare the numeric holonomy with closed forms and/or propagation.
    Compare,
    /// Brute-force stroboscopic evolution around the loop.
    Propagate,
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for pair in &cli.set {
        raw.set_pair(pair)?;
    }
    RunConfig::from_raw(&raw)
}

fn exit_code_for(err: &HolonomyError) -> u8 {
    match err {
        HolonomyError::InvalidInput(_)
        | HolonomyError::LoopNotClosed(_)
        | HolonomyError::UnsupportedLoop(_)
        | HolonomyError::UnsupportedModel(_)
        | HolonomyError::DimensionMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn emit(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn json_text(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    text
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let cfg = load_config(cli).map_err(Failure::Config)?;
    match cli.command {
        Command::Holonomy => commands::holonomy(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Propagate => commands::propagate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    let (text, code, summary) = match run(&cli) {
        Ok(outcome) => {
            let text = match outcome.document {
                Document::Json(v) => json_text(&seal(v, Some(timestamp()))),
                Document::Csv(s) => s,
            };
            let code = if outcome.within_tolerance { 0 } else { EXIT_TOLERANCE };
            (text, code, outcome.summary)
        }
        Err(Failure::Config(e)) => {
            let doc = json!({ "error": { "kind": "ConfigError", "message": e.0 } });
            (json_text(&doc), EXIT_CONFIG, format!("config error: {}", e.0))
        }
        Err(Failure::Pipeline(e)) => (json_text(&error_json(&e)), exit_code_for(&e), format!("{}: {e}", e.kind())),
    };
    if let Err(e) = emit(out, &text) {
        eprintln!("holonomy-lab: cannot write output: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if !cli.quiet {
        eprintln!("holonomy-lab: {summary}");
    }
    ExitCode::from(code)
}
