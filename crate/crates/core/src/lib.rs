//! Conditional reachability for Markov decision processes.
//!
//! The crate answers three kinds of questions about `Pr(◇G | ◇E)`, the
//! probability of reaching a goal set given that an evidence set is reached:
//! threshold checks, optimisation (exact or ε-approximate) and feasibility of
//! color-consistent memoryless policies.
//!
//! Everything is computed either in exact rational arithmetic or in `f64`; the
//! numeric domain is selected through the [`Scalar`] trait.

pub mod bisection;
#[cfg(feature = "cli")]
pub mod cli;
pub mod colored;
pub mod conditional;
pub mod error;
pub mod generate;
pub mod graph;
pub mod model;
pub mod parse;
pub mod rational;
pub mod scalar;
pub mod solver;

pub use error::Error;
pub use model::{Choice, Mdp, MdpBuilder, MemorylessPolicy, StateSet};
pub use rational::Rational;
pub use scalar::{Scalar, Sign};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Optimisation direction over policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    pub fn is_max(self) -> bool {
        self == Direction::Max
    }

    /// `true` if `a` is strictly better than `b` in this direction.
    pub fn better<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            Direction::Max => a > b,
            Direction::Min => a < b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Max => "max",
            Direction::Min => "min",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Direction::Max),
            "min" => Ok(Direction::Min),
            _ => Err(Error::InvalidArgument(format!("unknown direction '{s}'"))),
        }
    }
}

/// Arithmetic mode of a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Float,
    /// Exact probes, stopped once the bracket is within 2ε.
    EpsExact,
}

impl Mode {
    pub fn is_exact(self) -> bool {
        !matches!(self, Mode::Float)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
            Mode::EpsExact => "eps-exact",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "float" => Ok(Mode::Float),
            "eps-exact" => Ok(Mode::EpsExact),
            _ => Err(Error::InvalidArgument(format!("unknown mode '{s}'"))),
        }
    }
}
