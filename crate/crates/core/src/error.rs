use thiserror::Error;

/// Errors raised anywhere in the surveillance engine.
///
/// Node indices carried by errors are 1-based, matching file formats and
/// CLI output; time indices are the snapshot times.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-positive mean {value} at pair ({src},{dst}), t={t}")]
    NonPositiveMean { src: usize, dst: usize, t: u32, value: f64 },
    #[error("time indices must be contiguous from 1: expected t={expected}, found t={found}")]
    NonContiguousTime { expected: u32, found: u32 },
    #[error("smoothing weight alpha={0} outside [0,1]")]
    BadAlpha(f64),
    #[error("snapshot t={found} does not follow smoother state t={state}")]
    TimeSkew { state: u32, found: u32 },
    #[error("team is empty")]
    EmptyTeam,
    #[error("negative input to flag rule: {0}")]
    NegativeInput(f64),
    #[error("leader {0} is a member of its own neighbourhood")]
    LeaderInTeam(usize),
    #[error("refined team is not a subset of the leader neighbourhood")]
    OmegaNotSubset,
    #[error("significance threshold k={0} is negative")]
    BadK(f64),
    #[error("adaptive plan requires a fitted threshold surrogate")]
    SurrogateMissing,
    #[error("surrogate kind {found} cannot be used here, expected {expected}")]
    SurrogateKindMismatch { expected: String, found: String },
    #[error("replication count must be at least 1")]
    ZeroReps,
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("in-control ATS at h=0 is at least {ats:.2} (runs censored where unresolved), above target {target}; no threshold can reach it")]
    NoBracket { ats: f64, target: f64 },
    #[error("calibration budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("{samples} samples cannot fit a {basis}-term basis")]
    TooFewSamples { samples: usize, basis: usize },
    #[error("design matrix is rank deficient (rank {rank} < {basis})")]
    RankDeficient { rank: usize, basis: usize },
    #[error("surrogate predicts non-positive threshold at lambda={lambda}, n={n}")]
    NonPositivePrediction { lambda: f64, n: usize },
    #[error("dominant-leader simulation id {0} is not one of 1..=4")]
    BadSimId(u8),
    #[error("scenario has no change point")]
    NoChangePoint,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("negative count {count} at line {line}")]
    NegativeCount { line: usize, count: i64 },
    #[error("empty series")]
    EmptySeries,
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the filesystem rather than by invalid input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Parse {
                line: e.line(),
                message: e.to_string(),
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
