mod args;
mod commands;
mod io;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Map, Value};

use args::Cli;
use report::num;

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let started = Instant::now();
    let loaded = match io::load_instance(cli.command.instance()) {
        Ok(l) => l,
        Err(msg) => return fail(&msg),
    };
    let inst = &loaded.validated.instance;
    let mut outcome = match commands::run(&cli.command, &cli.global, inst) {
        Ok(o) => o,
        Err(msg) => return fail(&msg),
    };

    let g = &cli.global;
    let mut parameters = Map::new();
    parameters.insert("tol".into(), num(g.tol));
    parameters.insert("max_iter".into(), json!(g.max_iter));
    parameters.insert("seed".into(), json!(g.seed));
    parameters.insert("cap".into(), json!(g.cap));
    parameters.extend(std::mem::take(&mut outcome.parameters));

    let mut warnings: Vec<String> = loaded
        .validated
        .warnings
        .iter()
        .map(|w| w.to_string())
        .collect();
    warnings.append(&mut outcome.warnings);
    outcome.warnings = warnings;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }

    let converged = outcome.converged;
    let elapsed = started.elapsed().as_millis() as u64;
    let doc: Value = report::envelope(
        cli.command.name(),
        &loaded.digest,
        parameters,
        outcome,
        elapsed,
    );
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    if writeln!(std::io::stdout().lock(), "{text}").is_err() {
        return ExitCode::from(EXIT_INVALID);
    }
    if converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: solver did not converge");
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn fail(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INVALID)
}
