//! Command-line front end: argument parsing, report emission and the
//! acceptance suite. The binary is a thin wrapper around [`run`].

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::panic::{self, AssertUnwindSafe};

use clap::error::ErrorKind;
use clap::Parser;

pub mod commands;
pub mod config;
pub mod input;
pub mod report;
pub mod verify;

use commands::Outcome;
use config::{Cli, Command, RunConfig};

/// Worker stack size; deep words recurse in the enumerators.
pub const STACK_SIZE: usize = 64 << 20;

pub mod exit {
    pub const OK: i32 = 0;
    pub const COMPUTATION: i32 = 1;
    pub const ACCEPTANCE: i32 = 2;
    pub const CONFIG: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Computation(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Computation(_) | CliError::Io(_) => exit::COMPUTATION,
            CliError::Acceptance(_) => exit::ACCEPTANCE,
        }
    }
}

fn color_enabled() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal()
}

fn paint(line: &str) -> String {
    if !color_enabled() {
        return line.to_string();
    }
    line.replacen(" PASS ", " \x1b[32mPASS\x1b[0m ", 1).replacen(" FAIL ", " \x1b[31mFAIL\x1b[0m ", 1)
}

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", paint(line));
    let _ = out.flush();
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Validate(_) => commands::validate(cfg),
        Command::Delta(_) => commands::delta(cfg),
        Command::Pressure(_) => commands::pressure(cfg),
        Command::Scan(_) => commands::scan(cfg),
        Command::CountOrbit(_) => commands::count_orbit(cfg),
        Command::CountGeodesics(_) => commands::count_geodesics(cfg),
        Command::CountVectors(_) => commands::count_vectors(cfg),
        Command::Holonomy(_) => commands::holonomy(cfg),
        Command::Clt(_) => commands::clt(cfg),
        Command::VerifyAll(_) => verify::verify_all(cfg, say),
    }
}

fn run_parsed(cli: &Cli) -> Result<(), CliError> {
    let cfg = config::resolve(cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new().stack_size(STACK_SIZE);
    if let Some(n) = cfg.settings.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Computation(e.to_string()))?;
    let outcome = pool.install(|| execute(cli, &cfg))?;
    // verify-all streams its table as it goes
    if !matches!(cli.command, Command::VerifyAll(_)) {
        outcome.lines.iter().for_each(|l| say(l));
    }
    let dir = cfg.report_dir();
    report::emit_report(&outcome.report, &dir)?;
    say(&format!("report: {}", dir.display()));
    if outcome.failures > 0 {
        return Err(CliError::Acceptance(format!("{} criteria failed", outcome.failures)));
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::CONFIG,
            };
        }
    };
    let result = panic::catch_unwind(AssertUnwindSafe(|| run_parsed(&cli)));
    match result {
        Ok(Ok(())) => exit::OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure (see message above)");
            exit::COMPUTATION
        }
    }
}
