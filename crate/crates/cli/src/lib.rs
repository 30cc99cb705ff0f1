//! Experiment harness behind the `ac` binary: config parsing, single runs
//! with energy/max-norm monitoring and CSV/snapshot output, convergence
//! studies against exact or fine-grid reference solutions, and side-by-side
//! scheme comparisons.
//!
//! Everything the binary does is callable as a library (the integration and
//! acceptance tests drive these functions directly); `main.rs` is a thin
//! argument-parsing shell.
//!
//! # Exit codes
//!
//! | code | meaning                                             |
//! |------|-----------------------------------------------------|
//! | 0    | success                                             |
//! | 1    | I/O or other environmental failure                  |
//! | 2    | config invalid (parse error, bad value, stability   |
//! |      | window violated without `--allow-unsafe`)           |
//! | 3    | invariant violated in validated mode (max-norm > 1, |
//! |      | energy increase, broken cubic precondition)         |
//! | 4    | numeric failure (non-finite values, solver divergence) |

pub mod compare;
pub mod config;
pub mod converge;
pub mod output;
pub mod runner;

/// Harness-level error, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("invariant violated at step {step} (t = {t:.6}): {what}")]
    Invariant { step: usize, t: f64, what: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Invariant { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }
}
