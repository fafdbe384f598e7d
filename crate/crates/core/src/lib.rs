//! Unconditionally secure multi-party protocols over constructible rings.
//!
//! Parties hold private ring elements and talk over channels that are either
//! secure (visible only to the two endpoints) or insecure. With secure
//! channels arranged in a cycle, sums, products, power sums, comparisons,
//! commitments, oblivious transfer, card dealing and secret sharing can all be
//! done without one-way functions. Every protocol here runs on a deterministic
//! simulator ([`engine`]) whose transcripts feed an exhaustive secrecy checker
//! ([`analysis`]).

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod protocols;
pub mod ring;
pub mod serde_util;
pub mod tape;
pub mod topology;

pub use engine::{
    eavesdropper_view, extract_view, run, Message, Payload, Recipient, Run, RunEnv, Transcript, View,
};
pub use error::{Error, Result};
pub use ring::{RingElement, RingError, RingSpec};
pub use tape::{ChaChaTape, Odometer, RandomTape, ScriptTape, ScriptedTapes, SeededTapes, TapeFactory};
pub use topology::{Capability, ChannelGraph, PartyId, Security, TopologyError, TopologyRejection};
