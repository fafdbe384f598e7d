//! JSON run configurations, dispatch from configuration to protocol, and
//! transcript replay.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{self, Message, Protocol, RunEnv, Transcript};
use crate::error::{Error, Result};
use crate::protocols::arith::{
    self, CycleAggregate, ExampleF1, ExampleF2, Millionaires, MillionairesBitwise, SecureRating, SumOfPowers, UnaryFn,
};
use crate::protocols::commitment::{
    Commit2, Commit3, CommitK, CommitmentLedger, Decommit2, Decommit3, ObliviousTransfer, SplitMode,
};
use crate::protocols::poker::{CollectiveRandom, Deal};
use crate::protocols::secret_sharing::{self, DistributeShares, ShareSecret};
use crate::ring::{RingElement, RingSpec};
use crate::topology::{Capability, ChannelGraph, TopologySpec};

/// The protocol-specific part of a configuration. Written into every
/// transcript header so a seeded run can be rebuilt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum ProtocolConfig {
    Sum {
        inputs: Vec<RingElement>,
    },
    Product {
        inputs: Vec<RingElement>,
    },
    Rating {
        inputs: Vec<RingElement>,
    },
    PowerSum {
        inputs: Vec<RingElement>,
        power: u32,
    },
    ExampleF1 {
        inputs: Vec<RingElement>,
    },
    ExampleF2 {
        inputs: Vec<RingElement>,
        g: UnaryFn,
    },
    Millionaires {
        inputs: Vec<RingElement>,
    },
    MillionairesBitwise {
        inputs: Vec<u64>,
        bit_width: u32,
    },
    Commit3 {
        inputs: Vec<RingElement>,
        #[serde(default)]
        mode: SplitMode,
    },
    Decommit3 {
        ledgers: Vec<CommitmentLedger>,
    },
    Commit2 {
        inputs: Vec<RingElement>,
    },
    Decommit2 {
        ledgers: Vec<CommitmentLedger>,
    },
    Ot {
        messages: Vec<RingElement>,
        indices: Vec<usize>,
    },
    CommitK {
        inputs: Vec<RingElement>,
    },
    Deal {
        cards: u64,
        counter_bound: u64,
        #[serde(default)]
        quotas: Option<Vec<u64>>,
        #[serde(default)]
        shuffle: bool,
        #[serde(default = "yes")]
        distribute: bool,
        #[serde(default)]
        dealer: Option<usize>,
    },
    Random {
        modulus: u64,
        receiver: usize,
        contributors: [usize; 2],
        #[serde(default)]
        fixed: Option<u64>,
    },
    Subroutine {
        m: RingElement,
        initiator: usize,
    },
    Share {
        secret: RingElement,
    },
}

fn yes() -> bool {
    true
}

impl ProtocolConfig {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("configuration serializes")
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolConfig::Sum { .. } => "sum",
            ProtocolConfig::Product { .. } => "product",
            ProtocolConfig::Rating { .. } => "rating",
            ProtocolConfig::PowerSum { .. } => "power_sum",
            ProtocolConfig::ExampleF1 { .. } => "example_f1",
            ProtocolConfig::ExampleF2 { .. } => "example_f2",
            ProtocolConfig::Millionaires { .. } => "millionaires",
            ProtocolConfig::MillionairesBitwise { .. } => "millionaires_bitwise",
            ProtocolConfig::Commit3 { .. } => "commit3",
            ProtocolConfig::Decommit3 { .. } => "decommit3",
            ProtocolConfig::Commit2 { .. } => "commit2",
            ProtocolConfig::Decommit2 { .. } => "decommit2",
            ProtocolConfig::Ot { .. } => "ot",
            ProtocolConfig::CommitK { .. } => "commit_k",
            ProtocolConfig::Deal { .. } => "deal",
            ProtocolConfig::Random { .. } => "random",
            ProtocolConfig::Subroutine { .. } => "subroutine",
            ProtocolConfig::Share { .. } => "share",
        }
    }

    /// Topology used when a configuration names none.
    pub fn default_graph(&self, players: Option<usize>) -> Result<ChannelGraph> {
        let cycle = |n: usize| -> Result<ChannelGraph> { Ok(ChannelGraph::cycle(n)?) };
        match self {
            ProtocolConfig::Sum { inputs }
            | ProtocolConfig::Product { inputs }
            | ProtocolConfig::PowerSum { inputs, .. }
            | ProtocolConfig::ExampleF1 { inputs }
            | ProtocolConfig::ExampleF2 { inputs, .. }
            | ProtocolConfig::Commit3 { inputs, .. }
            | ProtocolConfig::CommitK { inputs } => cycle(inputs.len()),
            ProtocolConfig::Rating { inputs } => arith::rating_graph(inputs.len()),
            ProtocolConfig::Decommit3 { ledgers } => cycle(ledgers.len()),
            ProtocolConfig::Millionaires { .. }
            | ProtocolConfig::MillionairesBitwise { .. }
            | ProtocolConfig::Commit2 { .. }
            | ProtocolConfig::Decommit2 { .. }
            | ProtocolConfig::Ot { .. } => Ok(arith::dummy_triangle()),
            ProtocolConfig::Deal { .. } | ProtocolConfig::Random { .. } | ProtocolConfig::Subroutine { .. } => {
                cycle(players.unwrap_or(3))
            }
            ProtocolConfig::Share { .. } => secret_sharing::share_graph(players.unwrap_or(3)),
        }
    }

    fn needs_ring(&self) -> bool {
        !matches!(
            self,
            ProtocolConfig::MillionairesBitwise { .. } | ProtocolConfig::Deal { .. } | ProtocolConfig::Random { .. }
        )
    }
}

/// A complete run configuration, as read by `ringmpc run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub ring: Option<RingSpec>,
    #[serde(default)]
    pub topology: Option<TopologySpec>,
    /// Shorthand for a cycle (or dealer-plus-cycle for `share`) of this size.
    #[serde(default)]
    pub players: Option<usize>,
    #[serde(default)]
    pub roster: Option<Vec<Capability>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("invalid configuration: {e}")))
    }

    pub fn graph(&self) -> Result<ChannelGraph> {
        match &self.topology {
            Some(t) => Ok(t.build()?),
            None => self.protocol.default_graph(self.players),
        }
    }
}

/// Result JSON plus transcript of a configured run.
#[derive(Debug, Clone)]
pub struct Report {
    pub result: Value,
    pub transcript: Transcript,
}

/// Builds the protocol named by `cfg` and runs it.
pub fn execute(
    cfg: &ProtocolConfig,
    ring: Option<&RingSpec>,
    graph: ChannelGraph,
    roster: Option<Vec<Capability>>,
    env: RunEnv<'_>,
) -> Result<Report> {
    let ring = match ring {
        Some(r) => r.clone(),
        None if cfg.needs_ring() => {
            return Err(Error::input(format!("protocol {} needs a \"ring\"", cfg.name())));
        }
        None => RingSpec::modular(2).expect("Z_2"),
    };
    fn go<P: Protocol>(p: &P, env: RunEnv<'_>, f: impl FnOnce(P::Outcome) -> Value) -> Result<Report> {
        let run = engine::run(p, env)?;
        Ok(Report {
            result: f(run.outcome),
            transcript: run.transcript,
        })
    }
    let pair = |v: &[RingElement], what: &str| -> Result<[RingElement; 2]> {
        v.to_vec()
            .try_into()
            .map_err(|_| Error::input(format!("{what} needs exactly 2 inputs")))
    };
    let inputs_of = |v: &Vec<RingElement>| v.clone();
    match cfg {
        ProtocolConfig::Sum { inputs } | ProtocolConfig::Product { inputs } => {
            let mut p = if matches!(cfg, ProtocolConfig::Sum { .. }) {
                CycleAggregate::sum(ring, graph, inputs_of(inputs))
            } else {
                CycleAggregate::product(ring, graph, inputs_of(inputs))
            };
            if let Some(r) = roster {
                p = p.with_roster(r);
            }
            let key = cfg.name();
            go(&p, env, |v| json!({ key: v }))
        }
        ProtocolConfig::Rating { inputs } => go(
            &SecureRating {
                ring,
                graph,
                inputs: inputs.clone(),
            },
            env,
            |v| json!({ "rating": v }),
        ),
        ProtocolConfig::PowerSum { inputs, power } => go(
            &SumOfPowers {
                ring,
                graph,
                inputs: inputs.clone(),
                power: *power,
            },
            env,
            |v| json!({ "power_sum": v }),
        ),
        ProtocolConfig::ExampleF1 { inputs } => go(
            &ExampleF1 {
                ring,
                graph,
                inputs: inputs.clone(),
            },
            env,
            |v| json!({ "f1": v }),
        ),
        ProtocolConfig::ExampleF2 { inputs, g } => go(
            &ExampleF2 {
                ring,
                graph,
                inputs: inputs.clone(),
                g: g.clone(),
            },
            env,
            |v| json!({ "f2": v }),
        ),
        ProtocolConfig::Millionaires { inputs } => go(
            &Millionaires {
                ring,
                graph,
                inputs: pair(inputs, "millionaires")?,
            },
            env,
            |v| json!({ "verdict": v }),
        ),
        ProtocolConfig::MillionairesBitwise { inputs, bit_width } => {
            let [a, b]: [u64; 2] = inputs
                .clone()
                .try_into()
                .map_err(|_| Error::input("millionaires_bitwise needs exactly 2 inputs"))?;
            go(&MillionairesBitwise::new(graph, a, b, *bit_width)?, env, |v| json!(v))
        }
        ProtocolConfig::Commit3 { inputs, mode } => go(
            &Commit3 {
                ring,
                graph,
                inputs: inputs.clone(),
                mode: *mode,
            },
            env,
            |v| json!({ "ledgers": v }),
        ),
        ProtocolConfig::Decommit3 { ledgers } => go(
            &Decommit3 {
                ring,
                graph,
                ledgers: ledgers.clone(),
            },
            env,
            |v| json!({ "values": v }),
        ),
        ProtocolConfig::Commit2 { inputs } => go(
            &Commit2 {
                ring,
                graph,
                inputs: pair(inputs, "commit2")?,
            },
            env,
            |v| json!({ "ledgers": v }),
        ),
        ProtocolConfig::Decommit2 { ledgers } => go(
            &Decommit2 {
                ring,
                graph,
                ledgers: ledgers.clone(),
            },
            env,
            |v| json!(v),
        ),
        ProtocolConfig::Ot { messages, indices } => go(
            &ObliviousTransfer {
                ring,
                graph,
                messages: messages.clone(),
                indices: indices.clone(),
            },
            env,
            |v| json!({ "received": v }),
        ),
        ProtocolConfig::CommitK { inputs } => go(
            &CommitK {
                ring,
                graph,
                inputs: inputs.clone(),
            },
            env,
            |v| json!({ "opened": v }),
        ),
        ProtocolConfig::Deal {
            cards,
            counter_bound,
            quotas,
            shuffle,
            distribute,
            dealer,
        } => {
            let k = graph.k();
            let mut d = Deal::new(graph, *cards, *counter_bound)
                .with_roster(roster.unwrap_or_else(|| vec![Capability::Full; k]))
                .with_shuffle(*shuffle)
                .with_distribute(*distribute)
                .with_dealer(*dealer);
            if let Some(q) = quotas {
                d = d.with_quotas(q.clone());
            }
            go(&d, env, |v| {
                json!({
                    "quotas": v.quotas,
                    "hands": v.labelled_hands(),
                    "indices": v.hands,
                    "zero_keeper": v.zero_keeper,
                    "permutation": v.permutation,
                    "residual": v.residual,
                })
            })
        }
        ProtocolConfig::Random {
            modulus,
            receiver,
            contributors,
            fixed,
        } => {
            let mut p = CollectiveRandom::new(graph, *modulus, *receiver, *contributors);
            if let Some(f) = fixed {
                p = p.with_fixed(*f);
            }
            go(&p, env, |v| json!({ "value": v }))
        }
        ProtocolConfig::Subroutine { m, initiator } => go(
            &DistributeShares {
                ring,
                graph,
                m: m.clone(),
                initiator: *initiator,
            },
            env,
            |v| json!({ "summands": v }),
        ),
        ProtocolConfig::Share { secret } => go(
            &ShareSecret {
                ring,
                graph,
                secret: secret.clone(),
            },
            env,
            |v| json!(v),
        ),
    }
}

/// Runs a full configuration with its seed.
pub fn run_config(cfg: &RunConfig) -> Result<Report> {
    execute(
        &cfg.protocol,
        cfg.ring.as_ref(),
        cfg.graph()?,
        cfg.roster.clone(),
        RunEnv::seeded(cfg.seed),
    )
}

/// Where a transcript first departs from its honest re-execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub seq: u64,
    pub recorded: Option<String>,
    pub expected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayVerdict {
    Verified { messages: usize },
    Diverged(Divergence),
}

fn describe(m: &Message) -> String {
    format!("{} -> {} [{}] {}", m.from, m.to, m.label, m.payload)
}

/// Re-executes a seeded transcript from its header and compares every message.
pub fn replay(t: &Transcript) -> Result<ReplayVerdict> {
    if !t.meta.replayable() {
        return Err(Error::input("transcript has no seed or configuration to replay"));
    }
    let cfg: ProtocolConfig = serde_json::from_value(t.meta.config.clone())
        .map_err(|e| Error::input(format!("unreadable configuration in transcript: {e}")))?;
    let seed = t.meta.seed.expect("replayable");
    let honest = execute(
        &cfg,
        Some(&t.meta.ring),
        t.meta.topology.clone(),
        Some(t.meta.roster.clone()),
        RunEnv::seeded(seed),
    );
    // a header the honest re-execution cannot run at all is an error, not a divergence
    let expected = honest?.transcript.messages;
    let n = t.messages.len().max(expected.len());
    for i in 0..n {
        let (a, b) = (t.messages.get(i), expected.get(i));
        if a != b {
            return Ok(ReplayVerdict::Diverged(Divergence {
                seq: i as u64,
                recorded: a.map(describe),
                expected: b.map(describe),
            }));
        }
    }
    Ok(ReplayVerdict::Verified {
        messages: t.messages.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Payload;

    #[test]
    fn sum_config_round_trip() {
        let text = r#"{"protocol":"sum","inputs":[3,5,7],"ring":{"ring":"Zm","m":"101"},"seed":4}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let report = run_config(&cfg).unwrap();
        assert_eq!(report.result, json!({"sum": "15"}));
        assert_eq!(replay(&report.transcript).unwrap(), ReplayVerdict::Verified { messages: 6 });
        let again = run_config(&cfg).unwrap();
        assert_eq!(report.transcript.to_jsonl(), again.transcript.to_jsonl());
    }

    #[test]
    fn flipped_payload_is_located() {
        let cfg = RunConfig::from_json(r#"{"protocol":"sum","inputs":[1,2,3,4],"ring":{"ring":"Zm","m":"7"},"seed":1}"#)
            .unwrap();
        let mut t = run_config(&cfg).unwrap().transcript;
        let old = t.messages[2].payload.as_element().unwrap().clone();
        t.messages[2].payload = Payload::Element(RingSpec::modular(7).unwrap().add(&old, &RingElement::from(1)));
        match replay(&t).unwrap() {
            ReplayVerdict::Diverged(d) => assert_eq!(d.seq, 2),
            v => panic!("expected divergence, got {v:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        assert!(RunConfig::from_json(r#"{"protocol":"sum"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"protocol":"nope","inputs":[]}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"protocol":"sum","inputs":[1,2,3]}"#).unwrap();
        assert!(matches!(run_config(&cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn deal_config() {
        let cfg =
            RunConfig::from_json(r#"{"protocol":"deal","cards":52,"counter_bound":10,"shuffle":true,"players":3,"seed":2}"#)
                .unwrap();
        let r = run_config(&cfg).unwrap();
        let mut sizes: Vec<usize> = r.result["hands"].as_array().unwrap().iter().map(|h| h.as_array().unwrap().len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![17, 17, 18]);
        assert!(matches!(replay(&r.transcript).unwrap(), ReplayVerdict::Verified { .. }));
    }
}
