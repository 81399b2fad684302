use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_height}x{expected_width}, got {height}x{width}")]
    DimensionMismatch {
        expected_height: usize,
        expected_width: usize,
        height: usize,
        width: usize,
    },
    #[error("corrupt diff record: {0}")]
    CorruptDiff(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("out-of-order set: step {step} requested but head is {head}")]
    OutOfOrderSet { step: u64, head: u64 },
    #[error("state does not continue the stored stream and is not an episode start")]
    StateMismatch,
    #[error("step {0} has been evicted")]
    Evicted(u64),
    #[error("step {step} not yet written (head is {head})")]
    NotYetWritten { step: u64, head: u64 },
    #[error("episode discipline: step {0} follows a terminal step but is not flagged as an episode start")]
    EpisodeDiscipline(u64),
    #[error("buffer is empty")]
    EmptyBuffer,
    #[error("no sampleable transitions in buffer")]
    NoValidTransitions,
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("unsupported buffer file version {0}")]
    VersionMismatch(u32),
    #[error("invalid generator params: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
