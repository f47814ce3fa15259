//! `lab <config.json> [--out-dir DIR] [--validate-only]`
//!
//! Exit codes: 0 success, 2 invalid config or a hypothesis-type failure,
//! 3 numerical failure or I/O error.

mod config;
mod experiments;
mod output;
mod svg;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use output::Manifest;

#[derive(Parser, Debug)]
#[command(name = "lab", version, about = "Run a seeded shearlab experiment from a JSON config")]
struct Cli {
    /// Experiment configuration (JSON).
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Check the config and exit without running.
    #[arg(long)]
    validate_only: bool,
}

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var("LAB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("LAB_THREADS must be a positive integer, got {v:?}")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let raw = match config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if let (Some(dir), false) = (&cli.out_dir, cli.validate_only) {
                fail_manifest(dir, None, started, &e);
            }
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| raw.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let valid = match config::validate(raw.clone()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            if !cli.validate_only {
                fail_manifest(&out_dir, Some(&raw), started, &e);
            }
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if cli.validate_only {
        println!("config ok: {:?}", valid.raw.experiment);
        return ExitCode::SUCCESS;
    }
    match thread_cap() {
        Ok(Some(n)) => {
            // Only fails if a pool already exists, which cannot happen this early.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            fail_manifest(&out_dir, Some(&valid.raw), started, &e);
            return ExitCode::from(EXIT_INPUT);
        }
    }
    if let Err(e) = fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(EXIT_NUMERICAL);
    }
    let result = experiments::run(&valid.params, valid.seed);
    let table = match result {
        Ok(t) => t,
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error: {msg}");
            fail_manifest(&out_dir, Some(&valid.raw), started, &msg);
            return ExitCode::from(if e.is_hypothesis() { EXIT_INPUT } else { EXIT_NUMERICAL });
        }
    };
    let written = output::write_csv(&out_dir, &table)
        .and_then(|_| output::write_plot(&out_dir, &table))
        .and_then(|_| {
            output::write_manifest(
                &out_dir,
                &Manifest {
                    schema_version: output::SCHEMA_VERSION,
                    library_version: shearlab::VERSION,
                    config: Some(&valid.raw),
                    status: "ok",
                    wall_time_s: started.elapsed().as_secs_f64(),
                    errors: Vec::new(),
                    summary: table.summary.clone(),
                },
            )
        });
    match written {
        Ok(()) => {
            println!("{} rows written to {}", table.rows.len(), out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: writing artifacts: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

/// Best effort: a failed run still leaves a manifest behind.
fn fail_manifest(dir: &std::path::Path, cfg: Option<&config::ExperimentConfig>, started: Instant, err: &str) {
    if fs::create_dir_all(dir).is_err() {
        return;
    }
    let m = Manifest {
        schema_version: output::SCHEMA_VERSION,
        library_version: shearlab::VERSION,
        config: cfg,
        status: "error",
        wall_time_s: started.elapsed().as_secs_f64(),
        errors: vec![err.to_string()],
        summary: json!(null),
    };
    let _ = output::write_manifest(dir, &m);
}
