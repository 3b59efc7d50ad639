use thiserror::Error;

use crate::fixed_point::TraceRow;
use crate::model::{Population, TypeVector};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed config text or an out-of-range setting.
    #[error("configuration error: {0}")]
    Config(String),

    /// A population spec whose truncation box admits invalid type vectors.
    #[error("invalid population spec ({population}): {reason}")]
    InvalidSpec { population: Population, reason: String },

    /// An operation was called outside the regime where it is defined.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The scalar best-response solve could not bracket or converge.
    #[error("best-response solve failed: {reason}")]
    RootFinding { reason: String, zeta: Box<TypeVector> },

    /// Same as [`Error::RootFinding`] with the offending agent attached.
    #[error("best-response solve failed for {population} agent {index}: {reason}")]
    AgentRootFinding {
        population: Population,
        index: usize,
        reason: String,
        zeta: Box<TypeVector>,
    },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        trace: Vec<TraceRow>,
    },

    /// Relative utility exponent too large to exponentiate.
    #[error("utility exponent {max_exponent:.1} overflows f64; reduce risk aversion or wealth scale")]
    UtilityOverflow { max_exponent: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn with_agent(self, population: Population, index: usize) -> Self {
        match self {
            Error::RootFinding { reason, zeta } => Error::AgentRootFinding {
                population,
                index,
                reason,
                zeta,
            },
            other => other,
        }
    }
}
