//! Parties, channels and the cycle-cover requirement on secure channels.
//!
//! A party whose secure-channel degree is 0 or 1 cannot send anything that
//! is hidden from everyone (resp. from its single neighbour). With exactly
//! `k` secure channels for `k` parties, every vertex having degree at least 2
//! forces degree exactly 2 by the handshake lemma, so the secure subgraph
//! must be a disjoint union of cycles, each of length at least 3.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub usize);

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Whether a party may generate randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Full,
    /// Receives, computes, answers requests; never draws randomness.
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Security {
    Secure,
    Insecure,
}

impl fmt::Display for Security {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Security::Secure => "secure",
            Security::Insecure => "insecure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("need at least 3 parties on a cycle, got {0}")]
    TooFewParties(usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate channel between {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} out of range for {k} parties")]
    VertexOutOfRange { vertex: usize, k: usize },
    #[error("required channel between {0} and {1} is missing")]
    MissingChannel(usize, usize),
    #[error("required channel between {0} and {1} must be secure")]
    InsecureChannel(usize, usize),
    #[error("graph has {graph} vertices but the protocol needs {expected}")]
    PartyCount { graph: usize, expected: usize },
    #[error("topology rejected")]
    Rejected(#[from] TopologyRejection),
}

/// Why a secure subgraph is not a disjoint union of cycles of length >= 3.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum TopologyRejection {
    #[error("graph has no vertices")]
    Empty,
    #[error("vertex {vertex} has no secure channel")]
    Isolated { vertex: usize },
    #[error("degree-1 vertex {vertex} (only secure neighbour {neighbour})")]
    DegreeOne { vertex: usize, neighbour: usize },
    #[error("vertex {vertex} has secure degree {degree}, cycles need exactly 2")]
    ExcessDegree { vertex: usize, degree: usize },
}

/// Parties as vertices, channels as bidirectional edges tagged secure or insecure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelGraph {
    k: usize,
    edges: BTreeMap<(usize, usize), Security>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl ChannelGraph {
    pub fn new(k: usize) -> Self {
        ChannelGraph {
            k,
            edges: BTreeMap::new(),
        }
    }

    pub fn from_edges(
        k: usize,
        edges: impl IntoIterator<Item = (usize, usize, Security)>,
    ) -> Result<Self, TopologyError> {
        let mut g = ChannelGraph::new(k);
        for (a, b, s) in edges {
            g.add_edge(a, b, s)?;
        }
        Ok(g)
    }

    /// Secure edges `(i, i+1 mod k)`.
    pub fn cycle(k: usize) -> Result<Self, TopologyError> {
        if k < 3 {
            return Err(TopologyError::TooFewParties(k));
        }
        Self::from_edges(k, (0..k).map(|i| (i, (i + 1) % k, Security::Secure)))
    }

    /// Disjoint secure cycles of the given lengths over consecutive vertices.
    pub fn disjoint_cycles(lengths: &[usize]) -> Result<Self, TopologyError> {
        let k = lengths.iter().sum();
        let mut g = ChannelGraph::new(k);
        let mut base = 0;
        for &len in lengths {
            if len < 3 {
                return Err(TopologyError::TooFewParties(len));
            }
            for i in 0..len {
                g.add_edge(base + i, base + (i + 1) % len, Security::Secure)?;
            }
            base += len;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, a: usize, b: usize, security: Security) -> Result<(), TopologyError> {
        for v in [a, b] {
            if v >= self.k {
                return Err(TopologyError::VertexOutOfRange { vertex: v, k: self.k });
            }
        }
        if a == b {
            return Err(TopologyError::SelfLoop(a));
        }
        if self.edges.insert(key(a, b), security).is_some() {
            return Err(TopologyError::DuplicateEdge(a.min(b), a.max(b)));
        }
        Ok(())
    }

    /// Adds the edge, or upgrades/keeps it if already present.
    pub fn ensure_edge(&mut self, a: usize, b: usize, security: Security) -> Result<(), TopologyError> {
        match self.security(a, b) {
            Some(_) => {
                if security == Security::Secure {
                    self.edges.insert(key(a, b), Security::Secure);
                }
                Ok(())
            }
            None => self.add_edge(a, b, security),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Security)> + '_ {
        self.edges.iter().map(|(&(a, b), &s)| (a, b, s))
    }

    pub fn security(&self, a: usize, b: usize) -> Option<Security> {
        self.edges.get(&key(a, b)).copied()
    }

    pub fn secure_neighbours(&self, v: usize) -> Vec<usize> {
        self.neighbours_within(v, None)
    }

    fn neighbours_within(&self, v: usize, within: Option<&[bool]>) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|(_, &s)| s == Security::Secure)
            .filter_map(|(&(a, b), _)| match v {
                _ if a == v => Some(b),
                _ if b == v => Some(a),
                _ => None,
            })
            .filter(|&u| within.is_none_or(|w| w[u]))
            .collect()
    }

    pub fn secure_degree(&self, v: usize) -> usize {
        self.secure_neighbours(v).len()
    }

    /// Accepts iff the secure subgraph is a disjoint union of cycles of length >= 3.
    pub fn validate_topology(&self) -> Result<(), TopologyRejection> {
        let all: Vec<usize> = (0..self.k).collect();
        self.validate_cycle_cover(&all)
    }

    /// Like [`validate_topology`](Self::validate_topology) but only over the
    /// secure edges among `participants`.
    pub fn validate_cycle_cover(&self, participants: &[usize]) -> Result<(), TopologyRejection> {
        if participants.is_empty() {
            return Err(TopologyRejection::Empty);
        }
        let mask = self.mask(participants);
        for &v in participants {
            let nb = self.neighbours_within(v, Some(&mask));
            match nb.len() {
                0 => return Err(TopologyRejection::Isolated { vertex: v }),
                1 => {
                    return Err(TopologyRejection::DegreeOne {
                        vertex: v,
                        neighbour: nb[0],
                    })
                }
                2 => {}
                degree => return Err(TopologyRejection::ExcessDegree { vertex: v, degree }),
            }
        }
        // simple graph, all degrees 2: each component is a cycle of length >= 3
        Ok(())
    }

    fn mask(&self, participants: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.k];
        for &v in participants {
            if v < self.k {
                mask[v] = true;
            }
        }
        mask
    }

    /// The oriented cycles of a validated cover. Each cycle starts at its
    /// smallest vertex and continues to that vertex's smaller neighbour, so
    /// `cycle(k)` yields `[0, 1, ..., k-1]`.
    pub fn secure_cycles(&self, participants: &[usize]) -> Result<Vec<Vec<usize>>, TopologyRejection> {
        self.validate_cycle_cover(participants)?;
        let mask = self.mask(participants);
        let mut visited = vec![false; self.k];
        let mut sorted = participants.to_vec();
        sorted.sort_unstable();
        let mut cycles = Vec::new();
        for &start in &sorted {
            if visited[start] {
                continue;
            }
            let mut nb = self.neighbours_within(start, Some(&mask));
            nb.sort_unstable();
            let mut cycle = vec![start];
            visited[start] = true;
            let (mut prev, mut cur) = (start, nb[0]);
            while cur != start {
                visited[cur] = true;
                cycle.push(cur);
                let next = self
                    .neighbours_within(cur, Some(&mask))
                    .into_iter()
                    .find(|&u| u != prev)
                    .expect("degree-2 vertex has another neighbour");
                prev = cur;
                cur = next;
            }
            cycles.push(cycle);
        }
        Ok(cycles)
    }

    /// The single oriented cycle through all of `participants`.
    pub fn single_cycle(&self, participants: &[usize]) -> Result<Vec<usize>, TopologyError> {
        let mut cycles = self.secure_cycles(participants)?;
        if cycles.len() != 1 {
            return Err(TopologyError::PartyCount {
                graph: cycles[0].len(),
                expected: participants.len(),
            });
        }
        Ok(cycles.remove(0))
    }

    /// Checks that each listed pair is connected (and secure where demanded).
    pub fn require_channels(&self, required: &[(usize, usize, Security)]) -> Result<(), TopologyError> {
        for &(a, b, s) in required {
            match self.security(a, b) {
                None => return Err(TopologyError::MissingChannel(a.min(b), a.max(b))),
                Some(Security::Insecure) if s == Security::Secure => {
                    return Err(TopologyError::InsecureChannel(a.min(b), a.max(b)))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn require_parties(&self, expected: usize) -> Result<(), TopologyError> {
        if self.k != expected {
            return Err(TopologyError::PartyCount {
                graph: self.k,
                expected,
            });
        }
        Ok(())
    }
}

/// Configuration form: `{"cycle": k}` or `{"k": n, "edges": [[i, j, "secure"], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySpec {
    Cycle { cycle: usize },
    Explicit { k: usize, edges: Vec<(usize, usize, Security)> },
}

impl TopologySpec {
    pub fn build(&self) -> Result<ChannelGraph, TopologyError> {
        match self {
            TopologySpec::Cycle { cycle } => ChannelGraph::cycle(*cycle),
            TopologySpec::Explicit { k, edges } => ChannelGraph::from_edges(*k, edges.iter().copied()),
        }
    }
}

impl From<&ChannelGraph> for TopologySpec {
    fn from(g: &ChannelGraph) -> Self {
        TopologySpec::Explicit {
            k: g.k,
            edges: g.edges().collect(),
        }
    }
}

impl Serialize for ChannelGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TopologySpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChannelGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        TopologySpec::deserialize(d)?
            .build()
            .map_err(serde::de::Error::custom)
    }
}
