use thiserror::Error;

use crate::cylinder::CylinderPartial;
use crate::game::{GameTrace, Player};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "{player} strategy `{strategy}` requested a move of length {distance} (step is {eps})"
    )]
    StrategyViolation {
        player: Player,
        strategy: String,
        distance: f64,
        eps: f64,
    },

    #[error("game not finished after {} steps", .0.steps())]
    TruncatedGame(Box<GameTrace>),

    #[error("cylinder walk not finished after {} steps", .0.steps)]
    TruncatedCylinder(Box<CylinderPartial>),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(
        "requested accuracy {requested:e} unreachable; best achievable bound is {achievable:e}"
    )]
    Accuracy { requested: f64, achievable: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
