//! `hetrob`: estimate, simulate, benchmark and verify from the shell.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 runtime
//! estimation error.

mod args;
mod commands;
mod verify;

use std::fmt;
use std::io::IsTerminal;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

/// A failed command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Some property check did not hold.
    Verify(String),
    /// Unreadable or invalid input.
    Input(String),
    /// The input was valid but the estimate could not be computed.
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn input(e: impl fmt::Display) -> Self {
        Failure::Input(e.to_string())
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verify(m) | Failure::Input(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

/// ANSI styling, disabled by `--no-color` or when the stream is not a terminal.
#[derive(Debug, Clone, Copy)]
pub struct Style {
    pub color: bool,
}

impl Style {
    fn paint(&self, code: &str, text: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    pub fn pass(&self, text: &str) -> String {
        self.paint("32", text)
    }

    pub fn fail(&self, text: &str) -> String {
        self.paint("31", text)
    }
}

/// The given seed, or a fresh one announced on stderr.
pub fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Style { color: !cli.no_color && std::io::stdout().is_terminal() };
    let err = Style { color: !cli.no_color && std::io::stderr().is_terminal() };
    let result = match cli.command {
        Command::Estimate(a) => commands::estimate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Rates(a) => commands::rates(&a),
        Command::Verify(a) => verify::run(&a, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{} {f}", err.fail("error:"));
            ExitCode::from(f.code())
        }
    }
}
