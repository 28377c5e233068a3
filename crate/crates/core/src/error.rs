use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("stream overflow: user {user} has d = {streams} > N = {dim}")]
    StreamOverflow { user: usize, streams: usize, dim: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{which}[{user}] has column rank {rank} < {streams}")]
    RankDeficient {
        which: &'static str,
        user: usize,
        rank: usize,
        streams: usize,
    },
    #[error("{which}[{user}] gauge block is singular (condition number {condition:e})")]
    SingularGaugeBlock {
        which: &'static str,
        user: usize,
        condition: f64,
    },
    #[error("channel H[{rx},{tx}] has a zero diagonal entry at slot {slot}")]
    SingularChannel { rx: usize, tx: usize, slot: usize },
    #[error("interference at receiver {user} spans {rank} dimensions, only {room} fit")]
    DegenerateSpan { user: usize, rank: usize, room: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::SingularGaugeBlock { .. }
                | Error::SingularChannel { .. }
                | Error::DegenerateSpan { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
