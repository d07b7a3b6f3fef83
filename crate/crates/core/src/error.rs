use thiserror::Error;

use crate::data::CctSchedule;
use crate::solver::ZakharovState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("unresolved on this grid: {0}")]
    Resolution(String),

    #[error("outside the admissible (k, s) region: {0}")]
    Domain(String),

    /// The last state that passed the blowup check is kept so callers can
    /// inspect where growth got out of hand.
    #[error("solution blew up near t = {time}")]
    Blowup {
        time: f64,
        last_good: Box<ZakharovState>,
    },

    #[error("parameter schedule infeasible in double precision: {reason}")]
    ScheduleInfeasible {
        reason: String,
        frontier: Box<CctSchedule>,
    },

    #[error("quadrature did not converge after {refinements} refinements (last change {last_change:e})")]
    Quadrature { refinements: usize, last_change: f64 },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
