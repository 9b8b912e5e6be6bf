use thiserror::Error;

use super::{Phase, PoolViolation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid match config: {0}")]
    InvalidConfig(String),

    #[error("invalid entity pool: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPool(Vec<PoolViolation>),

    #[error("action not allowed in phase {phase}")]
    WrongPhase { phase: Phase },

    /// An agent tried something the rules forbid; the caller forfeits that seat's team.
    #[error("illegal action by seat {seat}: {detail}")]
    IllegalAction { seat: usize, detail: String },

    /// A syntactically valid payload that cannot be acted on; the caller forfeits.
    #[error("malformed action by seat {seat}: {detail}")]
    MalformedOutput { seat: usize, detail: String },

    /// The driver asked the wrong seat to act. Engine or driver bug, never an agent fault.
    #[error("scheduling error: {0}")]
    Scheduling(String),

    #[error("game is already over")]
    AlreadyTerminal,
}
