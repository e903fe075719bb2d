use std::fmt;

use thiserror::Error;

/// Pipeline stage that produced a retryable failure.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Division,
    Division1,
    Division2,
    Link(usize),
    Attach,
    MatchingM1,
    MatchingM2,
    MatchingM3,
    ExtendLeaf,
    Connect,
    Spine,
    Cover,
    ReservoirConnect,
    Splice,
    Boost,
    Attack,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Division => write!(f, "division"),
            Stage::Division1 => write!(f, "division-1"),
            Stage::Division2 => write!(f, "division-2"),
            Stage::Link(i) => write!(f, "link-{i}"),
            Stage::Attach => write!(f, "attach"),
            Stage::MatchingM1 => write!(f, "matching-M1"),
            Stage::MatchingM2 => write!(f, "matching-M2"),
            Stage::MatchingM3 => write!(f, "matching-M3"),
            Stage::ExtendLeaf => write!(f, "extend-leaf"),
            Stage::Connect => write!(f, "connect"),
            Stage::Spine => write!(f, "spine"),
            Stage::Cover => write!(f, "cover"),
            Stage::ReservoirConnect => write!(f, "reservoir-connect"),
            Stage::Splice => write!(f, "splice"),
            Stage::Boost => write!(f, "boost"),
            Stage::Attack => write!(f, "attack"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("{stage} failed: {reason}")]
    Failed { stage: Stage, reason: String },
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }

    pub fn failed(stage: Stage, reason: impl Into<String>) -> Self {
        Error::Failed {
            stage,
            reason: reason.into(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Failed { .. })
    }

    /// Outermost stage tag, if any.
    pub fn stage(&self) -> Option<&Stage> {
        match self {
            Error::Failed { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Re-tag a failure with an enclosing stage, keeping the inner tag in the reason.
    pub fn within(self, outer: Stage) -> Self {
        match self {
            Error::Failed { stage, reason } => Error::Failed {
                stage: outer,
                reason: format!("{stage}: {reason}"),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
