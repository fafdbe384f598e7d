//! (k,k)-threshold secret sharing in which nobody, the dealer included,
//! learns which final share any player holds.
//!
//! Players `P0..P(k-1)` sit on a secure cycle; the dealer is party `k` with a
//! secure link to every player (`2k` secure channels in total).

use serde::{Deserialize, Serialize};

use super::{expect_len, neighbours, single_cycle};
use crate::config::ProtocolConfig;
use crate::engine::{self, Ctx, Message, Party, Payload, Protocol, Run, RunEnv, Transcript};
use crate::error::{Error, Result};
use crate::ring::{RingElement, RingSpec};
use crate::topology::{Capability, ChannelGraph, PartyId, Security, TopologyError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareVector {
    pub ring: RingSpec,
    /// `None` marks a withheld share.
    pub shares: Vec<Option<RingElement>>,
}

impl ShareVector {
    pub fn complete(ring: RingSpec, shares: Vec<RingElement>) -> Self {
        ShareVector {
            ring,
            shares: shares.into_iter().map(Some).collect(),
        }
    }
}

/// Sum of all shares; any missing share is an error.
pub fn reconstruct(v: &ShareVector) -> Result<RingElement> {
    let mut parts = Vec::with_capacity(v.shares.len());
    for (i, s) in v.shares.iter().enumerate() {
        match s {
            Some(s) => {
                v.ring.check(s)?;
                parts.push(s);
            }
            None => return Err(Error::input(format!("share of P{i} is missing; all shares are required"))),
        }
    }
    if parts.is_empty() {
        return Err(Error::input("no shares"));
    }
    Ok(v.ring.sum(parts))
}

/// Player cycle `0..k` plus a dealer at index `k` linked to every player.
pub fn share_graph(k: usize) -> Result<ChannelGraph> {
    let mut g = ChannelGraph::cycle(k)?;
    let mut edges: Vec<_> = g.edges().collect();
    let dealer_links = (0..k).map(|p| (p, k, Security::Secure));
    edges.extend(dealer_links);
    g = ChannelGraph::from_edges(k + 1, edges)?;
    Ok(g)
}

/// One player's part in a run of the subroutine.
#[derive(Debug, Clone, Default)]
pub struct SubState {
    noise: Option<RingElement>,
}

/// Step of the subroutine at `me`: initiator sends `M - m_i`, the others pass
/// on `m - m_j`, and the initiator's summand is `m_i` plus what comes back.
fn sub_start(ctx: &mut Ctx<'_>, state: &mut SubState, m: &RingElement, next: usize) -> Result<()> {
    let noise = ctx.sample_noise(false)?;
    let out = ctx.ring().sub(m, &noise);
    state.noise = Some(noise);
    ctx.send(PartyId(next), "partial", out)
}

fn sub_pass(ctx: &mut Ctx<'_>, got: &RingElement, next: usize) -> Result<RingElement> {
    let noise = ctx.sample_noise(false)?;
    let out = ctx.ring().sub(got, &noise);
    ctx.send(PartyId(next), "partial", out)?;
    Ok(noise)
}

/// The subroutine alone: `initiator` splits `m` among the cycle.
#[derive(Debug, Clone)]
pub struct DistributeShares {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub m: RingElement,
    pub initiator: usize,
}

pub struct SubParty {
    next: usize,
    initiator: bool,
    m: Option<RingElement>,
    state: SubState,
    summand: Option<RingElement>,
}

impl Party for SubParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if let Some(m) = self.m.clone() {
            ctx.record("M", m.clone());
            sub_start(ctx, &mut self.state, &m, self.next)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let got = msg.element()?.clone();
        let summand = if self.initiator {
            let mine = self.state.noise.as_ref().ok_or_else(|| Error::protocol("initiator has no noise"))?;
            ctx.ring().add(mine, &got)
        } else {
            sub_pass(ctx, &got, self.next)?
        };
        ctx.record("summand", summand.clone());
        self.summand = Some(summand);
        Ok(())
    }
}

impl Protocol for DistributeShares {
    type Party = SubParty;
    type Outcome = Vec<RingElement>;

    fn name(&self) -> &'static str {
        "subroutine"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        vec![Capability::Full; self.graph.k()]
    }

    fn check_topology(&self) -> Result<()> {
        single_cycle(&self.graph, &super::all_parties(&self.graph)).map(|_| ())
    }

    fn parties(&self) -> Result<Vec<SubParty>> {
        let cycle = single_cycle(&self.graph, &super::all_parties(&self.graph))?;
        if self.initiator >= cycle.len() {
            return Err(TopologyError::VertexOutOfRange {
                vertex: self.initiator,
                k: cycle.len(),
            }
            .into());
        }
        self.ring.check(&self.m)?;
        let m = self.m.clone();
        Ok((0..cycle.len())
            .map(|me| SubParty {
                next: neighbours(&cycle, me).1,
                initiator: me == self.initiator,
                m: (me == self.initiator).then(|| m.clone()),
                state: SubState::default(),
                summand: None,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<SubParty>, _: &Transcript) -> Result<Vec<RingElement>> {
        parties
            .into_iter()
            .map(|p| p.summand.ok_or_else(|| Error::protocol("subroutine did not return")))
            .collect()
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Subroutine {
            m: self.m.clone(),
            initiator: self.initiator,
        }
        .to_value()
    }
}

/// Splits `m` into per-player summands known only to their owners.
pub fn distribute_shares_subroutine(
    ring: &RingSpec,
    graph: &ChannelGraph,
    m: &RingElement,
    initiator: usize,
    env: RunEnv<'_>,
) -> Result<Run<Vec<RingElement>>> {
    let p = DistributeShares {
        ring: ring.clone(),
        graph: graph.clone(),
        m: m.clone(),
        initiator,
    };
    engine::run(&p, env)
}

/// The (k,k) scheme: the dealer splits the secret into `n_i` and, one step at
/// a time, hands `n_i` to `P_i`, which spreads it with the subroutine and
/// reports back when it returns.
#[derive(Debug, Clone)]
pub struct ShareSecret {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub secret: RingElement,
}

impl ShareSecret {
    fn players(&self) -> usize {
        self.graph.k().saturating_sub(1)
    }
}

pub enum SharingParty {
    Dealer {
        parts: Vec<RingElement>,
        step: usize,
    },
    Player {
        me: usize,
        next: usize,
        dealer: usize,
        state: SubState,
        received: Vec<RingElement>,
    },
}

impl Party for SharingParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let SharingParty::Dealer { parts, .. } = self else {
            return Ok(());
        };
        let secret = parts[0].clone();
        ctx.record("secret", secret.clone());
        let k = ctx.k() - 1;
        let mut split = Vec::with_capacity(k);
        for _ in 1..k {
            split.push(ctx.sample_noise(false)?);
        }
        let rest = ctx.ring().sub(&secret, &ctx.ring().sum(&split));
        split.push(rest);
        for (i, n) in split.iter().enumerate() {
            ctx.record(format!("n{i}"), n.clone());
        }
        *parts = split;
        ctx.send(PartyId(0), "n_i", parts[0].clone())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        match self {
            SharingParty::Dealer { parts, step } => {
                msg.payload.as_token()?;
                *step += 1;
                if *step < parts.len() {
                    ctx.send(PartyId(*step), "n_i", parts[*step].clone())?;
                }
                Ok(())
            }
            SharingParty::Player {
                me,
                next,
                dealer,
                state,
                received,
            } => {
                let got = msg.element()?.clone();
                match msg.label.as_str() {
                    "n_i" => sub_start(ctx, state, &got, *next),
                    "partial" if msg.from.0 != *dealer => {
                        // The initiator gets its own value back after a full circle.
                        let initiating = state.noise.is_some() && received.len() == *me;
                        if initiating {
                            let mine = state.noise.take().expect("initiator noise");
                            received.push(ctx.ring().add(&mine, &got));
                            ctx.send(PartyId(*dealer), "done", Payload::Token("done".into()))
                        } else {
                            let s = sub_pass(ctx, &got, *next)?;
                            received.push(s);
                            Ok(())
                        }
                    }
                    other => Err(Error::protocol(format!("unexpected message {other}"))),
                }
            }
        }
    }
}

impl Protocol for ShareSecret {
    type Party = SharingParty;
    type Outcome = ShareVector;

    fn name(&self) -> &'static str {
        "share"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        vec![Capability::Full; self.graph.k()]
    }

    fn check_topology(&self) -> Result<()> {
        let k = self.players();
        let players: Vec<usize> = (0..k).collect();
        let cycle = single_cycle(&self.graph, &players)?;
        if cycle != players {
            return Err(Error::input("players must form the cycle P0 -> P1 -> .. -> P(k-1)"));
        }
        let links: Vec<_> = (0..k).map(|p| (p, k, Security::Secure)).collect();
        self.graph.require_channels(&links)?;
        Ok(())
    }

    fn parties(&self) -> Result<Vec<SharingParty>> {
        let k = self.players();
        self.ring.check(&self.secret)?;
        let secret = self.secret.clone();
        let mut parties: Vec<SharingParty> = (0..k)
            .map(|me| SharingParty::Player {
                me,
                next: (me + 1) % k,
                dealer: k,
                state: SubState::default(),
                received: Vec::with_capacity(k),
            })
            .collect();
        parties.push(SharingParty::Dealer {
            parts: vec![secret],
            step: 0,
        });
        Ok(parties)
    }

    fn outcome(&self, parties: Vec<SharingParty>, _: &Transcript) -> Result<ShareVector> {
        let k = self.players();
        let mut shares = Vec::with_capacity(k);
        for p in parties {
            if let SharingParty::Player { received, .. } = p {
                expect_len(&received, k, "summands")?;
                shares.push(self.ring.sum(&received));
            }
        }
        Ok(ShareVector::complete(self.ring.clone(), shares))
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Share {
            secret: self.secret.clone(),
        }
        .to_value()
    }
}

/// Shares `secret` among `k` players over [`share_graph`]`(k)`.
pub fn share_secret_kk(ring: &RingSpec, secret: &RingElement, k: usize, env: RunEnv<'_>) -> Result<Run<ShareVector>> {
    let p = ShareSecret {
        ring: ring.clone(),
        graph: share_graph(k)?,
        secret: secret.clone(),
    };
    engine::run(&p, env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::ScriptedTapes;

    fn e(v: i64) -> RingElement {
        RingElement::from(v)
    }

    fn noise(ring: &RingSpec, xs: &[i64]) -> Vec<num_bigint::BigUint> {
        xs.iter().map(|&x| ring.noise_to_draw(&ring.element(x), false).unwrap()).collect()
    }

    #[test]
    fn subroutine_hand_trace() {
        let ring = RingSpec::integers(100).unwrap();
        let g = ChannelGraph::cycle(3).unwrap();
        let tapes = ScriptedTapes::new()
            .with(0, noise(&ring, &[4]))
            .with(1, noise(&ring, &[7]))
            .with(2, noise(&ring, &[5]));
        let run = distribute_shares_subroutine(&ring, &g, &e(10), 0, RunEnv::with_tapes(tapes)).unwrap();
        // P0 sends 6, P1 keeps 7 and sends -1, P2 keeps 5 and sends -6, P0 ends with 4 - 6
        assert_eq!(run.outcome, vec![e(-2), e(7), e(5)]);
        let sent: Vec<&RingElement> = run.transcript.messages.iter().map(|m| m.element().unwrap()).collect();
        assert_eq!(sent, vec![&e(6), &e(-1), &e(-6)]);
    }

    #[test]
    fn subroutine_zero() {
        let ring = RingSpec::modular(7).unwrap();
        let g = ChannelGraph::cycle(4).unwrap();
        let tapes = ScriptedTapes::new()
            .with_u64(0, [0])
            .with_u64(1, [0])
            .with_u64(2, [0])
            .with_u64(3, [0]);
        let run = distribute_shares_subroutine(&ring, &g, &e(0), 2, RunEnv::with_tapes(tapes)).unwrap();
        assert!(run.outcome.iter().all(|s| *s == e(0)));
    }

    #[test]
    fn sharing_sums_to_secret() {
        let ring = RingSpec::modular(251).unwrap();
        for k in 3..6 {
            for seed in 0..20 {
                let v = share_secret_kk(&ring, &e(100), k, RunEnv::seeded(seed)).unwrap().outcome;
                assert_eq!(reconstruct(&v).unwrap(), e(100));
            }
        }
        let z = RingSpec::integers(1000).unwrap();
        let v = share_secret_kk(&z, &e(0), 3, RunEnv::seeded(1)).unwrap().outcome;
        assert_eq!(reconstruct(&v).unwrap(), e(0));
    }

    #[test]
    fn dealer_sees_only_its_parts() {
        let ring = RingSpec::modular(3).unwrap();
        let run = share_secret_kk(&ring, &e(2), 3, RunEnv::seeded(4)).unwrap();
        let t = &run.transcript;
        let from_dealer: Vec<&Message> = t.messages.iter().filter(|m| m.from == PartyId(3)).collect();
        assert_eq!(from_dealer.len(), 3);
        assert!(from_dealer.iter().all(|m| m.label == "n_i"));
        let to_dealer: Vec<&Message> = t.messages.iter().filter(|m| m.to.includes(PartyId(3))).collect();
        assert!(to_dealer.iter().all(|m| m.payload.as_token().is_ok()));
    }

    #[test]
    fn reconstruct_examples() {
        let z = RingSpec::integers(1000).unwrap();
        let v = ShareVector::complete(z.clone(), vec![e(10), e(-3), e(93)]);
        assert_eq!(reconstruct(&v).unwrap(), e(100));
        let mut w = v.clone();
        w.shares[1] = None;
        assert!(reconstruct(&w).is_err());
        let zero = ShareVector::complete(z, vec![e(0); 3]);
        assert_eq!(reconstruct(&zero).unwrap(), e(0));
    }

    #[test]
    fn rejects_bad_topology() {
        let ring = RingSpec::modular(5).unwrap();
        let mut g = share_graph(3).unwrap();
        let p = ShareSecret {
            ring: ring.clone(),
            graph: ChannelGraph::cycle(4).unwrap(),
            secret: e(1),
        };
        assert!(engine::run(&p, RunEnv::seeded(0)).is_err());
        g = ChannelGraph::from_edges(4, g.edges().filter(|&(a, b, _)| !(a == 1 && b == 3))).unwrap();
        let p = ShareSecret { ring, graph: g, secret: e(1) };
        assert!(matches!(engine::run(&p, RunEnv::seeded(0)), Err(Error::Topology(_))));
    }
}
