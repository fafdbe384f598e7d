use thiserror::Error;

use crate::engine::TranscriptError;
use crate::ring::RingError;
use crate::tape::TapeError;
use crate::topology::{PartyId, TopologyError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("dummy party {party} attempted to draw randomness")]
    DummyRandomness { party: PartyId },
    #[error("no channel from {from} to {to}")]
    NoChannel { from: PartyId, to: PartyId },
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
    #[error("cheating detected by {detector}: {detail}")]
    CheatDetected { detector: PartyId, detail: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("wrong phase: expected {expected}, found {found}")]
    WrongPhase { expected: String, found: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("message limit of {0} exceeded")]
    MessageLimit(usize),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn cheat(detector: PartyId, detail: impl Into<String>) -> Self {
        Error::CheatDetected {
            detector,
            detail: detail.into(),
        }
    }
}
