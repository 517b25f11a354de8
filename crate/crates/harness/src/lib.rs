//! Experiment harness for the tug-of-war simulation tools.
//!
//! [`config`] reads the flat key-value configuration, [`experiments`] turns
//! a configuration into metrics (including the regularity experiments and
//! refinement ladders), [`record`] stamps metrics with the experiment id and
//! config hash and appends them to JSONL or CSV files, and [`cli`] is the
//! `tugwar` command line on top of all three.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod record;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] tugwar_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit status: 1 for invalid input, 2 for numerical failures,
    /// 3 when truncated runs dominate.
    pub fn exit_code(&self) -> i32 {
        use tugwar_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Core(e) => match e {
                E::Parameter(_) => 1,
                E::TruncatedGame(_) | E::TruncatedCylinder(_) | E::Estimation(_) => 3,
                E::Numeric(_)
                | E::Accuracy { .. }
                | E::Invariant(_)
                | E::NoConvergence { .. }
                | E::StrategyViolation { .. } => 2,
            },
        }
    }
}
