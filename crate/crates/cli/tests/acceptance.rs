//! The full acceptance suite at the small budget, one line per criterion.
//!
//! Runs without the libtest harness so the table is always printed.

use std::process::ExitCode;

use clap::Parser;
use schottky_thermo_cli::config::{self, Cli};
use schottky_thermo_cli::verify;

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let out = tmp.path().to_str().expect("utf-8 path");
    let cli = Cli::parse_from(["schottky-thermo", "verify-all", "--budget", "small", "--out", out]);
    let cfg = config::resolve(&cli).expect("default configuration resolves");
    match verify::verify_all(&cfg, |line| println!("{line}")) {
        Ok(outcome) if outcome.failures == 0 => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} criteria failed", outcome.failures);
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("acceptance suite did not run: {e}");
            ExitCode::FAILURE
        }
    }
}
