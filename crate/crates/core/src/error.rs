use thiserror::Error;

use crate::model::ValidationError;
use crate::parse::ParseError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Invalid(#[from] ValidationError),

    #[error("policy undefined at state {0}")]
    PolicyUndefined(usize),

    #[error("conditional probability undefined: evidence is unreachable")]
    Undefined,

    #[error("policy reaches the evidence with probability zero")]
    ZeroEvidence,

    #[error("reward on transition ({state}, {action}, {successor}) does not enter a terminal state")]
    RewardContract { state: usize, action: usize, successor: usize },

    #[error("model is cyclic")]
    Cyclic,

    #[error("unknown label '{0}'")]
    UnknownLabel(String),

    #[error("family has {size} members, above the cap of {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(String),
}
