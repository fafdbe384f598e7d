//! Protocol implementations. Each protocol is a [`Protocol`](crate::engine::Protocol)
//! instance plus a convenience function that runs it.

pub mod arith;
pub mod commitment;
pub mod poker;
pub mod secret_sharing;

use crate::error::{Error, Result};
use crate::topology::{ChannelGraph, TopologyError};

pub(crate) fn rejected(r: crate::topology::TopologyRejection) -> Error {
    Error::Topology(TopologyError::Rejected(r))
}

/// Oriented secure cycles covering `participants` (at least 3 of them).
pub(crate) fn cycle_cover(graph: &ChannelGraph, participants: &[usize]) -> Result<Vec<Vec<usize>>> {
    if participants.len() < 3 {
        return Err(TopologyError::TooFewParties(participants.len()).into());
    }
    graph.secure_cycles(participants).map_err(rejected)
}

/// The single oriented secure cycle through `participants`.
pub(crate) fn single_cycle(graph: &ChannelGraph, participants: &[usize]) -> Result<Vec<usize>> {
    if participants.len() < 3 {
        return Err(TopologyError::TooFewParties(participants.len()).into());
    }
    Ok(graph.single_cycle(participants)?)
}

pub(crate) fn all_parties(graph: &ChannelGraph) -> Vec<usize> {
    (0..graph.k()).collect()
}

pub(crate) fn expect_len<T>(items: &[T], k: usize, what: &str) -> Result<()> {
    if items.len() != k {
        return Err(Error::input(format!("expected {k} {what}, got {}", items.len())));
    }
    Ok(())
}

/// Position of `v` on `cycle` and its successor/predecessor.
pub(crate) fn neighbours(cycle: &[usize], v: usize) -> (usize, usize, usize) {
    let pos = cycle.iter().position(|&u| u == v).expect("vertex on its cycle");
    let len = cycle.len();
    (pos, cycle[(pos + 1) % len], cycle[(pos + len - 1) % len])
}
