//! Human preference arena: balanced session assignment, expansion-gated
//! votes on an append-only log, rating statistics and an HTTP API.

pub mod http;
pub mod stats;
pub mod store;

use thiserror::Error;

pub use http::{router, SharedArena, INSTRUCTIONS};
pub use stats::{export_pairs, rating_stats, RatingStats};
pub use store::{Arena, ArenaSession, Choice, Telemetry, Vote, VoteRecord, PAIRS_PER_SESSION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArenaError {
    #[error("pool holds {available} pair(s); a session needs 30")]
    PoolExhausted { available: usize },
    #[error("pair id `{0}` appears twice in the pool")]
    DuplicatePairId(String),
    #[error("no session `{0}`")]
    UnknownSession(String),
    #[error("no pair `{0}`")]
    UnknownPair(String),
    #[error("pair `{pair_id}` is not assigned to session `{session_id}`")]
    NotAssigned { session_id: String, pair_id: String },
    #[error("both sites must be expanded before voting (left: {left}, right: {right})")]
    NotExpanded { left: bool, right: bool },
    #[error("session `{session_id}` already voted on pair `{pair_id}`")]
    DuplicateVote { session_id: String, pair_id: String },
    #[error("vote log: {0}")]
    Log(String),
    #[error("io: {0}")]
    Io(String),
}

impl ArenaError {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            ArenaError::PoolExhausted { .. } => "pool_exhausted",
            ArenaError::DuplicatePairId(_) => "duplicate_pair_id",
            ArenaError::UnknownSession(_) => "unknown_session",
            ArenaError::UnknownPair(_) => "unknown_pair",
            ArenaError::NotAssigned { .. } => "not_assigned",
            ArenaError::NotExpanded { .. } => "not_expanded",
            ArenaError::DuplicateVote { .. } => "duplicate_vote",
            ArenaError::Log(_) => "log",
            ArenaError::Io(_) => "io",
        }
    }
}
