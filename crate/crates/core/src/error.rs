use thiserror::Error;

use crate::store::Side;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {}x{} and {}x{}", left.0, left.1, right.0, right.1)]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: non-finite input")]
    NonFinite { op: &'static str },
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("contract violation: {0}")]
    Contract(&'static str),
    #[error("time regression at interaction {seq}: t={time} precedes last interaction at {last}")]
    TimeRegression { seq: usize, time: f64, last: f64 },
    #[error("interaction log is not sorted by (time, seq) at position {position}")]
    Unsorted { position: usize },
    #[error("unknown {side} id {id}")]
    UnknownEntity { side: Side, id: usize },
    #[error("non-finite loss in batch {batch} (epoch {epoch})")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}
