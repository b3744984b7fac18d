mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use config::Cli;

/// Ways a run can end without success, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Collision(PathBuf),
    Core(jetexit::Error),
    Incomplete(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Collision(_) => 3,
            Failure::Core(_) | Failure::Incomplete(_) => 4,
            Failure::Validation(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Collision(_) => "output_collision",
            Failure::Core(e) => e.kind(),
            Failure::Incomplete(_) => "incomplete",
            Failure::Validation(_) => "validation",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Incomplete(m) | Failure::Validation(m) => m.clone(),
            Failure::Collision(p) => format!(
                "output directory {} is not empty; pass --force to overwrite",
                p.display()
            ),
            Failure::Core(e) => e.to_string(),
        }
    }
}

impl From<jetexit::Error> for Failure {
    fn from(e: jetexit::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    status: &'static str,
    exit_code: u8,
    kind: &'a str,
    message: String,
}

fn report(f: &Failure, output: Option<&Path>) {
    let r = ErrorReport {
        status: "error",
        exit_code: f.code(),
        kind: f.kind(),
        message: f.message(),
    };
    let json = serde_json::to_string(&r).expect("error report serializes");
    eprintln!("{json}");
    if let (Some(dir), false) = (output, matches!(f, Failure::Collision(_) | Failure::Usage(_))) {
        if dir.is_dir() {
            let _ = std::fs::write(dir.join("error.json"), json + "\n");
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("JETEXIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("JETEXIT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = configure_threads() {
        report(&f, None);
        return ExitCode::from(f.code());
    }
    let output = cli.command.common().output.clone();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f, Some(&output));
            ExitCode::from(f.code())
        }
    }
}
