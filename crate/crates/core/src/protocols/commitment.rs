//! Three-party commitment, two-party commitment through a dummy, and k-of-n
//! oblivious transfer through a dummy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::arith::{check_dummy_triangle, ALICE, BOB, DUMMY};
use super::{all_parties, single_cycle};
use crate::config::ProtocolConfig;
use crate::engine::{self, Ctx, Message, Party, Payload, Protocol, Run, RunEnv, Transcript};
use crate::error::{Error, Result};
use crate::ring::{RingElement, RingSpec};
use crate::tape::RandomTape;
use crate::topology::{Capability, ChannelGraph, PartyId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// `r` uniform over the ring, `s = n - r`.
    #[default]
    Integer,
    /// Bits over `Z_2`: 0 as 0+0 or 1+1, 1 as 0+1 or 1+0.
    Bit,
}

/// `committed = r + s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSplit {
    pub r: RingElement,
    pub s: RingElement,
    pub committed: RingElement,
}

fn check_mode(ring: &RingSpec, n: &RingElement, mode: SplitMode) -> Result<()> {
    ring.check(n)?;
    if mode == SplitMode::Bit && ring.modulus().map(|m| m != &2u8.into()).unwrap_or(true) {
        return Err(Error::input("bit commitments need the ring Z_2"));
    }
    Ok(())
}

fn split_with(ring: &RingSpec, n: &RingElement, r: RingElement) -> CommitSplit {
    CommitSplit {
        s: ring.sub(n, &r),
        r,
        committed: n.clone(),
    }
}

/// Random split `n = r + s` with `r` drawn as ring noise.
pub fn split_value(ring: &RingSpec, n: &RingElement, mode: SplitMode, tape: &mut dyn RandomTape) -> Result<CommitSplit> {
    check_mode(ring, n, mode)?;
    let r = ring.sample_noise(tape, false)?;
    Ok(split_with(ring, n, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Committed,
    Revealed,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Committed => "committed",
            Phase::Revealed => "revealed",
        })
    }
}

/// What one party holds after a commitment phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentLedger {
    pub party: PartyId,
    /// The party's own committed value (absent for a dummy).
    pub value: Option<RingElement>,
    pub held: BTreeMap<String, RingElement>,
    pub phase: Phase,
}

impl CommitmentLedger {
    fn new(party: usize, value: Option<RingElement>) -> Self {
        CommitmentLedger {
            party: PartyId(party),
            value,
            held: BTreeMap::new(),
            phase: Phase::Committed,
        }
    }

    pub fn get(&self, label: &str) -> Result<&RingElement> {
        self.held
            .get(label)
            .ok_or_else(|| Error::protocol(format!("{} holds no {label}", self.party)))
    }

    fn own(&self) -> Result<&RingElement> {
        self.value
            .as_ref()
            .ok_or_else(|| Error::protocol(format!("{} committed no value", self.party)))
    }

    fn labels(&self) -> Vec<&str> {
        self.held.keys().map(String::as_str).collect()
    }
}

fn require_committed(ledgers: &[CommitmentLedger], k: usize) -> Result<()> {
    if ledgers.len() != k {
        return Err(Error::input(format!("expected {k} ledgers, got {}", ledgers.len())));
    }
    for (i, l) in ledgers.iter().enumerate() {
        if l.party != PartyId(i) {
            return Err(Error::input(format!("ledger {i} belongs to {}", l.party)));
        }
        if l.phase != Phase::Committed {
            return Err(Error::WrongPhase {
                expected: Phase::Committed.to_string(),
                found: l.phase.to_string(),
            });
        }
    }
    Ok(())
}

fn ledgers_from<P>(parties: Vec<P>, f: impl Fn(P) -> CommitmentLedger) -> Vec<CommitmentLedger> {
    parties.into_iter().map(f).collect()
}

/// Three parties on a secure triangle. The `r` shares accumulate
/// `P0 -> P1 -> P2 -> P0`, the `s` shares `P2 -> P1 -> P0 -> P2`.
///
/// Afterwards `P0` holds `{s1, s2+s3, r1, r1+r2+r3}`, `P1` holds
/// `{s2, s3, r1, r2}` and `P2` holds `{s3, r3, r1+r2, s1+s2+s3}` (values
/// numbered from 1).
#[derive(Debug, Clone)]
pub struct Commit3 {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: Vec<RingElement>,
    pub mode: SplitMode,
}

pub struct Commit3Party {
    ledger: CommitmentLedger,
}

impl Party for Commit3Party {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let n = self.ledger.own()?.clone();
        ctx.record("input", n.clone());
        let r = ctx.sample_noise(false)?;
        let split = split_with(ctx.ring(), &n, r);
        let me = ctx.me().0;
        let i = me + 1;
        ctx.record(format!("r{i}"), split.r.clone());
        ctx.record(format!("s{i}"), split.s.clone());
        match me {
            0 => {
                self.ledger.held.insert("r1".into(), split.r.clone());
                self.ledger.held.insert("s1".into(), split.s);
                ctx.send(PartyId(1), "r1", split.r)?;
            }
            1 => {
                self.ledger.held.insert("r2".into(), split.r);
                self.ledger.held.insert("s2".into(), split.s);
            }
            _ => {
                self.ledger.held.insert("r3".into(), split.r);
                self.ledger.held.insert("s3".into(), split.s.clone());
                ctx.send(PartyId(1), "s3", split.s)?;
            }
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        let m = msg.element()?.clone();
        let l = &mut self.ledger;
        l.held.insert(msg.label.clone(), m.clone());
        match (ctx.me().0, msg.label.as_str()) {
            (1, "r1") => {
                let out = ring.add(&m, l.get("r2")?);
                ctx.send(PartyId(2), "r1+r2", out)
            }
            (1, "s3") => {
                let out = ring.add(l.get("s2")?, &m);
                ctx.send(PartyId(0), "s2+s3", out)
            }
            (2, "r1+r2") => {
                let out = ring.add(&m, l.get("r3")?);
                ctx.send(PartyId(0), "r1+r2+r3", out)
            }
            (0, "s2+s3") => {
                let out = ring.add(l.get("s1")?, &m);
                ctx.send(PartyId(2), "s1+s2+s3", out)
            }
            (0, "r1+r2+r3") | (2, "s1+s2+s3") => Ok(()),
            (_, other) => Err(Error::protocol(format!("unexpected message {other}"))),
        }
    }
}

impl Protocol for Commit3 {
    type Party = Commit3Party;
    type Outcome = Vec<CommitmentLedger>;

    fn name(&self) -> &'static str {
        "commit3"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        vec![Capability::Full; 3]
    }

    fn check_topology(&self) -> Result<()> {
        self.graph.require_parties(3)?;
        single_cycle(&self.graph, &[0, 1, 2]).map(|_| ())
    }

    fn parties(&self) -> Result<Vec<Commit3Party>> {
        super::expect_len(&self.inputs, 3, "inputs")?;
        for n in &self.inputs {
            check_mode(&self.ring, n, self.mode)?;
        }
        Ok((0..3)
            .map(|i| Commit3Party {
                ledger: CommitmentLedger::new(i, Some(self.inputs[i].clone())),
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<Commit3Party>, _: &Transcript) -> Result<Vec<CommitmentLedger>> {
        let ledgers = ledgers_from(parties, |p| p.ledger);
        let want: [&[&str]; 3] = [
            &["r1", "r1+r2+r3", "s1", "s2+s3"],
            &["r1", "r2", "s2", "s3"],
            &["r1+r2", "r3", "s1+s2+s3", "s3"],
        ];
        for (l, w) in ledgers.iter().zip(want) {
            if l.labels() != w {
                return Err(Error::protocol(format!("{} ended with holdings {:?}", l.party, l.labels())));
            }
        }
        Ok(ledgers)
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Commit3 {
            inputs: self.inputs.clone(),
            mode: self.mode,
        }
        .to_value()
    }
}

pub fn commit3(
    ring: &RingSpec,
    graph: &ChannelGraph,
    inputs: &[RingElement],
    mode: SplitMode,
    env: RunEnv<'_>,
) -> Result<Run<Vec<CommitmentLedger>>> {
    engine::run(
        &Commit3 {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: inputs.to_vec(),
            mode,
        },
        env,
    )
}

/// Decommitment for [`Commit3`].
///
/// Steps, values numbered from 1:
///
/// | sender | receiver | value | receiver recovers |
/// |---|---|---|---|
/// | P2 | P0, P1 | `n1+n2` | P0: `n2`, then `n3` from `r2+r3` and `s2+s3`; P1: `n1` |
/// | P1 | P2 | `r1` | `r2` |
/// | P0 | P2 | `s2+s3` | `s2`, hence `n2` and `n1` |
/// | P0 | P1 | `r1+r2+r3` | `r3`, hence `n3` |
///
/// None of these is checkable by its receiver alone, so every party then
/// sends its recovered triple to both others. Each receiver compares it with
/// its own triple, which contains its own value; any disagreement is
/// reported as cheating.
#[derive(Debug, Clone)]
pub struct Decommit3 {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub ledgers: Vec<CommitmentLedger>,
}

pub struct Decommit3Party {
    ledger: CommitmentLedger,
    got: BTreeMap<String, RingElement>,
    triple: Option<Vec<RingElement>>,
    pending: Vec<(PartyId, Vec<RingElement>)>,
    confirmed: usize,
}

impl Decommit3Party {
    fn try_recover(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if self.triple.is_some() {
            return Ok(());
        }
        let ring = ctx.ring().clone();
        let l = &self.ledger;
        let own = l.own()?.clone();
        let g = |k: &str| self.got.get(k);
        let triple = match ctx.me().0 {
            0 => {
                let Some(a) = g("n1+n2") else { return Ok(()) };
                let n2 = ring.sub(a, &own);
                let n23 = ring.add(&ring.sub(l.get("r1+r2+r3")?, l.get("r1")?), l.get("s2+s3")?);
                let n3 = ring.sub(&n23, &n2);
                vec![own, n2, n3]
            }
            1 => {
                let (Some(a), Some(rr)) = (g("n1+n2"), g("r1+r2+r3")) else { return Ok(()) };
                let n1 = ring.sub(a, &own);
                let r3 = ring.sub(&ring.sub(rr, l.get("r1")?), l.get("r2")?);
                let n3 = ring.add(&r3, l.get("s3")?);
                vec![n1, own, n3]
            }
            _ => {
                let (Some(r1), Some(ss)) = (g("r1"), g("s2+s3")) else { return Ok(()) };
                let r2 = ring.sub(l.get("r1+r2")?, r1);
                let s2 = ring.sub(ss, l.get("s3")?);
                let n2 = ring.add(&r2, &s2);
                let n12 = self.sum12(&ring)?;
                vec![ring.sub(&n12, &n2), n2, own]
            }
        };
        ctx.record("revealed", Payload::Elements(triple.clone()));
        let me = ctx.me().0;
        for p in (0..3).filter(|&p| p != me) {
            ctx.send(PartyId(p), "reveal", Payload::Elements(triple.clone()))?;
        }
        self.triple = Some(triple);
        for (from, t) in std::mem::take(&mut self.pending) {
            self.confirm(from, &t, ctx)?;
        }
        Ok(())
    }

    /// `n1+n2` as `P2` derives it from `r1+r2` and `s1+s2+s3 - s3`.
    fn sum12(&self, ring: &RingSpec) -> Result<RingElement> {
        let l = &self.ledger;
        Ok(ring.add(l.get("r1+r2")?, &ring.sub(l.get("s1+s2+s3")?, l.get("s3")?)))
    }

    fn confirm(&mut self, from: PartyId, t: &[RingElement], ctx: &mut Ctx<'_>) -> Result<()> {
        let mine = self.triple.as_ref().expect("own triple present");
        if t.len() != 3 {
            return Err(Error::cheat(ctx.me(), format!("malformed reveal from {from}")));
        }
        if let Some(j) = (0..3).find(|&j| t[j] != mine[j]) {
            return Err(Error::cheat(
                ctx.me(),
                format!("reveal from {from} gives n{} = {}, expected {}", j + 1, t[j], mine[j]),
            ));
        }
        self.confirmed += 1;
        Ok(())
    }
}

impl Party for Decommit3Party {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if ctx.me().0 == 2 {
            let n12 = self.sum12(ctx.ring())?;
            ctx.send(PartyId(0), "n1+n2", n12.clone())?;
            ctx.send(PartyId(1), "n1+n2", n12)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        if msg.label == "reveal" {
            let t = msg.payload.as_elements()?.to_vec();
            if self.triple.is_some() {
                return self.confirm(msg.from, &t, ctx);
            }
            self.pending.push((msg.from, t));
            return Ok(());
        }
        let m = msg.element()?.clone();
        self.got.insert(msg.label.clone(), m);
        match (ctx.me().0, msg.label.as_str()) {
            (0, "n1+n2") => {
                let l = &self.ledger;
                let (ss, rr) = (l.get("s2+s3")?.clone(), l.get("r1+r2+r3")?.clone());
                ctx.send(PartyId(2), "s2+s3", ss)?;
                ctx.send(PartyId(1), "r1+r2+r3", rr)?;
            }
            (1, "n1+n2") => {
                let r1 = self.ledger.get("r1")?.clone();
                ctx.send(PartyId(2), "r1", r1)?;
            }
            (1, "r1+r2+r3") | (2, "r1") | (2, "s2+s3") => {}
            (_, other) => return Err(Error::protocol(format!("unexpected message {other}"))),
        }
        self.try_recover(ctx)
    }
}

impl Protocol for Decommit3 {
    type Party = Decommit3Party;
    type Outcome = Vec<RingElement>;

    fn name(&self) -> &'static str {
        "decommit3"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        vec![Capability::Full; 3]
    }

    fn check_topology(&self) -> Result<()> {
        self.graph.require_parties(3)?;
        single_cycle(&self.graph, &[0, 1, 2]).map(|_| ())
    }

    fn parties(&self) -> Result<Vec<Decommit3Party>> {
        require_committed(&self.ledgers, 3)?;
        Ok(self
            .ledgers
            .iter()
            .map(|l| Decommit3Party {
                ledger: l.clone(),
                got: BTreeMap::new(),
                triple: None,
                pending: Vec::new(),
                confirmed: 0,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<Decommit3Party>, _: &Transcript) -> Result<Vec<RingElement>> {
        let mut triples = Vec::new();
        for p in parties {
            if p.confirmed != 2 {
                return Err(Error::protocol(format!("{} confirmed {} reveals", p.ledger.party, p.confirmed)));
            }
            triples.push(p.triple.expect("confirmed parties hold a triple"));
        }
        Ok(triples.swap_remove(0))
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Decommit3 {
            ledgers: self.ledgers.clone(),
        }
        .to_value()
    }
}

/// Runs [`Decommit3`] and marks the ledgers revealed on success.
pub fn decommit3(
    ring: &RingSpec,
    graph: &ChannelGraph,
    ledgers: &mut [CommitmentLedger],
    env: RunEnv<'_>,
) -> Result<Run<Vec<RingElement>>> {
    let run = engine::run(
        &Decommit3 {
            ring: ring.clone(),
            graph: graph.clone(),
            ledgers: ledgers.to_vec(),
        },
        env,
    )?;
    for l in ledgers.iter_mut() {
        l.phase = Phase::Revealed;
    }
    Ok(run)
}

/// Two-party commitment with a dummy `D`. `A` sends `s1` to `B`, `B` sends `r2`
/// to `A`, then `A` sends `r1+r2` and `B` sends `s1+s2` to `D`.
#[derive(Debug, Clone)]
pub struct Commit2 {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: [RingElement; 2],
}

pub struct Commit2Party {
    ledger: CommitmentLedger,
}

impl Party for Commit2Party {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let me = ctx.me();
        if me == DUMMY {
            return Ok(());
        }
        let n = self.ledger.own()?.clone();
        ctx.record("input", n.clone());
        let r = ctx.sample_noise(false)?;
        let split = split_with(ctx.ring(), &n, r);
        let (i, give, other) = if me == ALICE { (1, "s1", BOB) } else { (2, "r2", ALICE) };
        self.ledger.held.insert(format!("r{i}"), split.r.clone());
        self.ledger.held.insert(format!("s{i}"), split.s.clone());
        let out = if me == ALICE { split.s } else { split.r };
        ctx.send(other, give, out)
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        let m = msg.element()?.clone();
        let l = &mut self.ledger;
        l.held.insert(msg.label.clone(), m.clone());
        match (ctx.me(), msg.label.as_str()) {
            (ALICE, "r2") => {
                let out = ring.add(l.get("r1")?, &m);
                ctx.send(DUMMY, "r1+r2", out)
            }
            (BOB, "s1") => {
                let out = ring.add(&m, l.get("s2")?);
                ctx.send(DUMMY, "s1+s2", out)
            }
            (DUMMY, "r1+r2") | (DUMMY, "s1+s2") => Ok(()),
            (_, other) => Err(Error::protocol(format!("unexpected message {other}"))),
        }
    }
}

impl Protocol for Commit2 {
    type Party = Commit2Party;
    type Outcome = Vec<CommitmentLedger>;

    fn name(&self) -> &'static str {
        "commit2"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        vec![Capability::Full, Capability::Full, Capability::Dummy]
    }

    fn check_topology(&self) -> Result<()> {
        check_dummy_triangle(&self.graph)
    }

    fn parties(&self) -> Result<Vec<Commit2Party>> {
        self.inputs.iter().try_for_each(|x| self.ring.check(x))?;
        Ok(vec![
            Commit2Party {
                ledger: CommitmentLedger::new(0, Some(self.inputs[0].clone())),
            },
            Commit2Party {
                ledger: CommitmentLedger::new(1, Some(self.inputs[1].clone())),
            },
            Commit2Party {
                ledger: CommitmentLedger::new(2, None),
            },
        ])
    }

    fn outcome(&self, parties: Vec<Commit2Party>, _: &Transcript) -> Result<Vec<CommitmentLedger>> {
        let ledgers = ledgers_from(parties, |p| p.ledger);
        let want: [&[&str]; 3] = [&["r1", "r2", "s1"], &["r2", "s1", "s2"], &["r1+r2", "s1+s2"]];
        for (l, w) in ledgers.iter().zip(want) {
            if l.labels() != w {
                return Err(Error::protocol(format!("{} ended with holdings {:?}", l.party, l.labels())));
            }
        }
        Ok(ledgers)
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Commit2 {
            inputs: self.inputs.to_vec(),
        }
        .to_value()
    }
}

pub fn commit2_dummy(
    ring: &RingSpec,
    graph: &ChannelGraph,
    n1: &RingElement,
    n2: &RingElement,
    env: RunEnv<'_>,
) -> Result<Run<Vec<CommitmentLedger>>> {
    engine::run(
        &Commit2 {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: [n1.clone(), n2.clone()],
        },
        env,
    )
}

/// Values learned in [`Decommit2`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revealed2 {
    /// `n2` as recovered by `A`.
    pub n2_at_a: RingElement,
    /// `n1` as recovered by `B`.
    pub n1_at_b: RingElement,
}

/// Decommitment for [`Commit2`]. `A` and `B` first exchange their claimed
/// values, then each asks `D` to open; `D` sends `r1+r2+s1+s2` to both, and
/// each checks the other's claim against `(n1+n2) - own`.
#[derive(Debug, Clone)]
pub struct Decommit2 {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub ledgers: Vec<CommitmentLedger>,
}

pub struct Decommit2Party {
    ledger: CommitmentLedger,
    claim: Option<RingElement>,
    total: Option<RingElement>,
    opens: usize,
    learned: Option<RingElement>,
}

impl Decommit2Party {
    fn check(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let (Some(claim), Some(total)) = (&self.claim, &self.total) else {
            return Ok(());
        };
        let derived = ctx.ring().sub(total, self.ledger.own()?);
        if &derived != claim {
            let other = if ctx.me() == ALICE { "n2" } else { "n1" };
            return Err(Error::cheat(
                ctx.me(),
                format!("claimed {other} = {claim} but the opened total implies {derived}"),
            ));
        }
        ctx.record("learned", derived.clone());
        self.learned = Some(derived);
        Ok(())
    }
}

impl Party for Decommit2Party {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let me = ctx.me();
        if me == DUMMY {
            return Ok(());
        }
        let (label, other) = if me == ALICE { ("n1", BOB) } else { ("n2", ALICE) };
        ctx.send(other, label, self.ledger.own()?.clone())?;
        ctx.send(DUMMY, "open", Payload::Token("open".into()))
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        match (ctx.me(), msg.label.as_str()) {
            (DUMMY, "open") => {
                if msg.payload.as_token().ok() != Some("open") {
                    return Err(Error::cheat(DUMMY, format!("malformed open request from {}", msg.from)));
                }
                self.opens += 1;
                if self.opens == 2 {
                    let ring = ctx.ring().clone();
                    let total = ring.add(self.ledger.get("r1+r2")?, self.ledger.get("s1+s2")?);
                    ctx.send(ALICE, "n1+n2", total.clone())?;
                    ctx.send(BOB, "n1+n2", total)?;
                }
                Ok(())
            }
            (ALICE, "n2") | (BOB, "n1") => {
                self.claim = Some(msg.element()?.clone());
                self.check(ctx)
            }
            (ALICE, "n1+n2") | (BOB, "n1+n2") => {
                self.total = Some(msg.element()?.clone());
                self.check(ctx)
            }
            (_, other) => Err(Error::protocol(format!("unexpected message {other}"))),
        }
    }
}

impl Protocol for Decommit2 {
    type Party = Decommit2Party;
    type Outcome = Revealed2;

    fn name(&self) -> &'static str {
        "decommit2"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        vec![Capability::Full, Capability::Full, Capability::Dummy]
    }

    fn check_topology(&self) -> Result<()> {
        check_dummy_triangle(&self.graph)
    }

    fn parties(&self) -> Result<Vec<Decommit2Party>> {
        require_committed(&self.ledgers, 3)?;
        Ok(self
            .ledgers
            .iter()
            .map(|l| Decommit2Party {
                ledger: l.clone(),
                claim: None,
                total: None,
                opens: 0,
                learned: None,
            })
            .collect())
    }

    fn outcome(&self, mut parties: Vec<Decommit2Party>, _: &Transcript) -> Result<Revealed2> {
        let missing = || Error::protocol("decommitment did not complete");
        let n1_at_b = parties[1].learned.take().ok_or_else(missing)?;
        let n2_at_a = parties[0].learned.take().ok_or_else(missing)?;
        Ok(Revealed2 { n2_at_a, n1_at_b })
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Decommit2 {
            ledgers: self.ledgers.clone(),
        }
        .to_value()
    }
}

pub fn decommit2_dummy(
    ring: &RingSpec,
    graph: &ChannelGraph,
    ledgers: &mut [CommitmentLedger],
    env: RunEnv<'_>,
) -> Result<Run<Revealed2>> {
    let run = engine::run(
        &Decommit2 {
            ring: ring.clone(),
            graph: graph.clone(),
            ledgers: ledgers.to_vec(),
        },
        env,
    )?;
    for l in ledgers.iter_mut() {
        l.phase = Phase::Revealed;
    }
    Ok(run)
}

/// k-of-n oblivious transfer through a dummy. `A` splits each message
/// `m_i = r_i + s_i`, sends all `r` to `D` and all `s` to `B`. `B` sends its
/// 1-based indices to `D`, which answers with the matching `r_j`.
#[derive(Debug, Clone)]
pub struct ObliviousTransfer {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub messages: Vec<RingElement>,
    pub indices: Vec<usize>,
}

pub enum OtParty {
    Sender {
        messages: Vec<RingElement>,
    },
    Receiver {
        indices: Vec<usize>,
        s: Option<Vec<RingElement>>,
        r: Option<Vec<RingElement>>,
        output: Option<Vec<RingElement>>,
    },
    Dummy {
        r: Option<Vec<RingElement>>,
        indices: Option<Vec<u64>>,
    },
}

impl Party for OtParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        match self {
            OtParty::Sender { messages } => {
                let ring = ctx.ring().clone();
                let mut rs = Vec::with_capacity(messages.len());
                let mut ss = Vec::with_capacity(messages.len());
                for m in messages.iter() {
                    let split = split_with(&ring, m, ctx.sample_noise(false)?);
                    rs.push(split.r);
                    ss.push(split.s);
                }
                ctx.send(DUMMY, "r", Payload::Elements(rs))?;
                ctx.send(BOB, "s", Payload::Elements(ss))
            }
            OtParty::Receiver { indices, .. } => {
                let ix = indices.iter().map(|&j| j as u64).collect();
                ctx.send(DUMMY, "indices", Payload::Integers(ix))
            }
            OtParty::Dummy { .. } => Ok(()),
        }
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        match self {
            OtParty::Sender { .. } => Err(Error::protocol(format!("sender received {}", msg.label))),
            OtParty::Dummy { r, indices } => {
                match msg.label.as_str() {
                    "r" => *r = Some(msg.payload.as_elements()?.to_vec()),
                    "indices" => *indices = Some(msg.payload.as_integers()?.to_vec()),
                    other => return Err(Error::protocol(format!("unexpected message {other}"))),
                }
                if let (Some(r), Some(ix)) = (r.as_ref(), indices.as_ref()) {
                    let mut out = Vec::with_capacity(ix.len());
                    for &j in ix {
                        let v = r
                            .get((j as usize).wrapping_sub(1))
                            .ok_or_else(|| Error::input(format!("index {j} out of range")))?;
                        out.push(v.clone());
                    }
                    ctx.send(BOB, "r_j", Payload::Elements(out))?;
                }
                Ok(())
            }
            OtParty::Receiver { indices, s, r, output } => {
                match msg.label.as_str() {
                    "s" => *s = Some(msg.payload.as_elements()?.to_vec()),
                    "r_j" => *r = Some(msg.payload.as_elements()?.to_vec()),
                    other => return Err(Error::protocol(format!("unexpected message {other}"))),
                }
                if let (Some(s), Some(r)) = (s.as_ref(), r.as_ref()) {
                    let ring = ctx.ring().clone();
                    let got: Vec<RingElement> = indices
                        .iter()
                        .zip(r)
                        .map(|(&j, rj)| ring.add(rj, &s[j - 1]))
                        .collect();
                    ctx.record("output", Payload::Elements(got.clone()));
                    *output = Some(got);
                }
                Ok(())
            }
        }
    }
}

impl Protocol for ObliviousTransfer {
    type Party = OtParty;
    type Outcome = Vec<RingElement>;

    fn name(&self) -> &'static str {
        "ot"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        vec![Capability::Full, Capability::Full, Capability::Dummy]
    }

    fn check_topology(&self) -> Result<()> {
        check_dummy_triangle(&self.graph)
    }

    fn parties(&self) -> Result<Vec<OtParty>> {
        let n = self.messages.len();
        if n == 0 {
            return Err(Error::input("no messages to transfer"));
        }
        if self.indices.is_empty() || self.indices.len() > n {
            return Err(Error::input(format!("need 1..={n} indices, got {}", self.indices.len())));
        }
        let mut seen = vec![false; n + 1];
        for &j in &self.indices {
            if j == 0 || j > n {
                return Err(Error::input(format!("index {j} out of range 1..={n}")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::input(format!("duplicate index {j}")));
            }
        }
        self.messages.iter().try_for_each(|x| self.ring.check(x))?;
        Ok(vec![
            OtParty::Sender {
                messages: self.messages.clone(),
            },
            OtParty::Receiver {
                indices: self.indices.clone(),
                s: None,
                r: None,
                output: None,
            },
            OtParty::Dummy { r: None, indices: None },
        ])
    }

    fn outcome(&self, parties: Vec<OtParty>, _: &Transcript) -> Result<Vec<RingElement>> {
        match parties.into_iter().nth(1) {
            Some(OtParty::Receiver { output: Some(o), .. }) => Ok(o),
            _ => Err(Error::protocol("receiver finished without output")),
        }
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Ot {
            messages: self.messages.clone(),
            indices: self.indices.clone(),
        }
        .to_value()
    }
}

pub fn ot_dummy(
    ring: &RingSpec,
    graph: &ChannelGraph,
    messages: &[RingElement],
    indices: &[usize],
    env: RunEnv<'_>,
) -> Result<Run<Vec<RingElement>>> {
    engine::run(
        &ObliviousTransfer {
            ring: ring.clone(),
            graph: graph.clone(),
            messages: messages.to_vec(),
            indices: indices.to_vec(),
        },
        env,
    )
}

/// Experimental k-party commitment on a secure k-cycle.
///
/// Commit: prefix sums of the `r` shares travel forward
/// (`P(i)` sends `r_0+..+r_i` to `P(i+1)`), prefix sums of the `s` shares
/// travel backward. Open: everyone broadcasts its split and the prefix sums
/// it received, and every value is checked against the two parties who saw
/// it. Not covered by the secrecy or binding suites.
#[derive(Debug, Clone)]
pub struct CommitK {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: Vec<RingElement>,
}

pub struct CommitKParty {
    me: usize,
    k: usize,
    cycle: Vec<usize>,
    value: RingElement,
    split: Option<CommitSplit>,
    r_prefix: Option<RingElement>,
    s_suffix: Option<RingElement>,
    opened: BTreeMap<usize, Vec<RingElement>>,
    revealed: Option<Vec<RingElement>>,
}

impl CommitKParty {
    fn pos(&self) -> usize {
        self.cycle.iter().position(|&v| v == self.me).expect("on cycle")
    }

    fn at(&self, pos: usize) -> usize {
        self.cycle[pos % self.k]
    }

    fn maybe_open(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let pos = self.pos();
        let need_r = pos != 0;
        let need_s = pos != self.k - 1;
        if (need_r && self.r_prefix.is_none()) || (need_s && self.s_suffix.is_none()) {
            return Ok(());
        }
        let split = self.split.clone().expect("split drawn at start");
        let zero = ctx.ring().zero();
        let out = vec![
            split.r,
            split.s,
            self.r_prefix.clone().unwrap_or(zero.clone()),
            self.s_suffix.clone().unwrap_or(zero),
        ];
        self.opened.insert(self.me, out.clone());
        ctx.broadcast("open", Payload::Elements(out))?;
        self.finish(ctx)
    }

    /// Checks every opened split against the neighbours' received sums.
    fn finish(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if self.opened.len() < self.k || self.revealed.is_some() {
            return Ok(());
        }
        let ring = ctx.ring().clone();
        let k = self.k;
        let mut r_acc = ring.zero();
        let mut s_acc = ring.zero();
        for p in 0..k {
            let o = &self.opened[&self.at(p)];
            if o.len() != 4 {
                return Err(Error::cheat(ctx.me(), format!("malformed opening from P{}", self.at(p))));
            }
            if p > 0 && o[2] != r_acc {
                return Err(Error::cheat(ctx.me(), format!("r prefix at P{} disagrees", self.at(p))));
            }
            r_acc = ring.add(&r_acc, &o[0]);
        }
        for p in (0..k).rev() {
            let o = &self.opened[&self.at(p)];
            if p < k - 1 && o[3] != s_acc {
                return Err(Error::cheat(ctx.me(), format!("s suffix at P{} disagrees", self.at(p))));
            }
            s_acc = ring.add(&s_acc, &o[1]);
        }
        let vals: Vec<RingElement> = (0..k).map(|i| ring.add(&self.opened[&i][0], &self.opened[&i][1])).collect();
        if vals[self.me] != self.value {
            return Err(Error::cheat(ctx.me(), "own value misreported"));
        }
        self.revealed = Some(vals);
        Ok(())
    }
}

impl Party for CommitKParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let r = ctx.sample_noise(false)?;
        let split = split_with(ctx.ring(), &self.value, r);
        self.split = Some(split.clone());
        let pos = self.pos();
        if pos == 0 {
            ctx.send(PartyId(self.at(1)), "r-prefix", split.r)?;
        }
        if pos == self.k - 1 {
            ctx.send(PartyId(self.at(self.k - 2)), "s-suffix", split.s)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        let pos = self.pos();
        let split = self.split.clone().expect("split drawn at start");
        match msg.label.as_str() {
            "r-prefix" => {
                let m = msg.element()?.clone();
                if pos + 1 < self.k {
                    ctx.send(PartyId(self.at(pos + 1)), "r-prefix", ring.add(&m, &split.r))?;
                }
                self.r_prefix = Some(m);
            }
            "s-suffix" => {
                let m = msg.element()?.clone();
                if pos > 0 {
                    ctx.send(PartyId(self.at(pos - 1)), "s-suffix", ring.add(&m, &split.s))?;
                }
                self.s_suffix = Some(m);
            }
            "open" => {
                self.opened.insert(msg.from.0, msg.payload.as_elements()?.to_vec());
                return self.finish(ctx);
            }
            other => return Err(Error::protocol(format!("unexpected message {other}"))),
        }
        self.maybe_open(ctx)
    }
}

impl Protocol for CommitK {
    type Party = CommitKParty;
    type Outcome = Vec<RingElement>;

    fn name(&self) -> &'static str {
        "commit_k"
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
        single_cycle(&self.graph, &all_parties(&self.graph)).map(|_| ())
    }

    fn parties(&self) -> Result<Vec<CommitKParty>> {
        let k = self.graph.k();
        super::expect_len(&self.inputs, k, "inputs")?;
        self.inputs.iter().try_for_each(|x| self.ring.check(x))?;
        let cycle = single_cycle(&self.graph, &all_parties(&self.graph))?;
        Ok((0..k)
            .map(|i| CommitKParty {
                me: i,
                k,
                cycle: cycle.clone(),
                value: self.inputs[i].clone(),
                split: None,
                r_prefix: None,
                s_suffix: None,
                opened: BTreeMap::new(),
                revealed: None,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<CommitKParty>, _: &Transcript) -> Result<Vec<RingElement>> {
        let mut out = None;
        for p in parties {
            let v = p.revealed.ok_or_else(|| Error::protocol("opening incomplete"))?;
            if out.as_ref().is_some_and(|o| o != &v) {
                return Err(Error::protocol("parties disagree on the opening"));
            }
            out = Some(v);
        }
        out.ok_or_else(|| Error::protocol("no parties"))
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::CommitK {
            inputs: self.inputs.clone(),
        }
        .to_value()
    }
}

/// Commit and open on a k-cycle in one run. See [`CommitK`].
pub fn commit_k(ring: &RingSpec, graph: &ChannelGraph, inputs: &[RingElement], env: RunEnv<'_>) -> Result<Run<Vec<RingElement>>> {
    engine::run(
        &CommitK {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: inputs.to_vec(),
        },
        env,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::extract_view;
    use crate::protocols::arith::dummy_triangle;
    use crate::tape::{ChaChaTape, ScriptedTapes};
    use num_bigint::BigUint;

    fn els(ring: &RingSpec, xs: &[i64]) -> Vec<RingElement> {
        xs.iter().map(|&x| ring.element(x)).collect()
    }

    fn draws(ring: &RingSpec, xs: &[i64]) -> Vec<BigUint> {
        xs.iter().map(|&x| ring.noise_to_draw(&ring.element(x), false).unwrap()).collect()
    }

    fn tri() -> ChannelGraph {
        ChannelGraph::cycle(3).unwrap()
    }

    #[test]
    fn split_value_modes() {
        let z2 = RingSpec::modular(2).unwrap();
        let mut tape = ChaChaTape::new(1, 0);
        let mut zeros = 0;
        for _ in 0..10_000 {
            let s = split_value(&z2, &z2.zero(), SplitMode::Bit, &mut tape).unwrap();
            assert_eq!(s.r, s.s);
            zeros += s.r.is_zero() as u32;
        }
        // 3 sigma for Bin(10000, 1/2) is 150
        assert!((zeros as i64 - 5000).abs() <= 150, "{zeros}");
        let one = split_value(&z2, &z2.one(), SplitMode::Bit, &mut tape).unwrap();
        assert_ne!(one.r, one.s);
        let z10 = RingSpec::modular(10).unwrap();
        for _ in 0..100 {
            let s = split_value(&z10, &z10.element(7), SplitMode::Integer, &mut tape).unwrap();
            assert_eq!(z10.add(&s.r, &s.s), z10.element(7));
        }
        assert!(split_value(&z10, &z10.one(), SplitMode::Bit, &mut tape).is_err());
    }

    #[test]
    fn commit3_hand_trace() {
        let ring = RingSpec::modular(10).unwrap();
        let tapes = ScriptedTapes::new()
            .with(0, draws(&ring, &[1]))
            .with(1, draws(&ring, &[2]))
            .with(2, draws(&ring, &[3]));
        let mut ledgers = commit3(&ring, &tri(), &els(&ring, &[3, 4, 5]), SplitMode::Integer, RunEnv::with_tapes(tapes))
            .unwrap()
            .outcome;
        let p2 = &ledgers[1].held;
        for (l, v) in [("s2", 2), ("s3", 2), ("r1", 1), ("r2", 2)] {
            assert_eq!(p2[l], ring.element(v), "{l}");
        }
        let out = decommit3(&ring, &tri(), &mut ledgers, RunEnv::seeded(0)).unwrap();
        assert_eq!(out.outcome, els(&ring, &[3, 4, 5]));
        assert!(ledgers.iter().all(|l| l.phase == Phase::Revealed));
        assert!(matches!(
            decommit3(&ring, &tri(), &mut ledgers, RunEnv::seeded(0)),
            Err(Error::WrongPhase { .. })
        ));
    }

    #[test]
    fn commit3_zero_view_and_bits() {
        let z2 = RingSpec::modular(2).unwrap();
        let tapes = ScriptedTapes::new().with_u64(0, [0]).with_u64(1, [0]).with_u64(2, [0]);
        let run = commit3(&z2, &tri(), &els(&z2, &[0, 0, 0]), SplitMode::Bit, RunEnv::with_tapes(tapes)).unwrap();
        for l in &run.outcome {
            assert!(l.held.values().all(|v| v.is_zero()));
        }
        let v = extract_view(&run.transcript, PartyId(0)).unwrap();
        let mut labels: Vec<String> = v.inventory().into_iter().map(|(l, _)| l).collect();
        labels.dedup();
        assert_eq!(labels, ["input", "r1", "r1+r2+r3", "s1", "s1+s2+s3", "s2+s3"]);
        let mut ledgers = commit3(&z2, &tri(), &els(&z2, &[1, 0, 1]), SplitMode::Bit, RunEnv::seeded(4))
            .unwrap()
            .outcome;
        assert_eq!(
            decommit3(&z2, &tri(), &mut ledgers, RunEnv::seeded(4)).unwrap().outcome,
            els(&z2, &[1, 0, 1])
        );
    }

    #[test]
    fn decommit3_detects_a_lie_about_the_sum() {
        let ring = RingSpec::modular(10).unwrap();
        let mut ledgers = commit3(&ring, &tri(), &els(&ring, &[3, 4, 5]), SplitMode::Integer, RunEnv::seeded(2))
            .unwrap()
            .outcome;
        let env = RunEnv::seeded(0).tamper(|m| {
            (m.label == "n1+n2" && m.to == crate::engine::Recipient::Party(PartyId(0)))
                .then(|| Payload::Element(RingElement::from(0)))
        });
        assert!(matches!(
            decommit3(&ring, &tri(), &mut ledgers, env),
            Err(Error::CheatDetected { .. })
        ));
    }

    #[test]
    fn commit2_hand_trace() {
        let ring = RingSpec::modular(10).unwrap();
        let g = dummy_triangle();
        let tapes = ScriptedTapes::new().with(0, draws(&ring, &[1])).with(1, draws(&ring, &[2]));
        let run = commit2_dummy(&ring, &g, &ring.element(3), &ring.element(4), RunEnv::with_tapes(tapes)).unwrap();
        let mut ledgers = run.outcome;
        assert_eq!(ledgers[2].held["r1+r2"], ring.element(3));
        assert_eq!(ledgers[2].held["s1+s2"], ring.element(4));
        assert_eq!(run.transcript.draws[2], 0);
        let out = decommit2_dummy(&ring, &g, &mut ledgers, RunEnv::seeded(0)).unwrap();
        assert_eq!(
            out.outcome,
            Revealed2 {
                n2_at_a: ring.element(4),
                n1_at_b: ring.element(3)
            }
        );
        let opened: Vec<String> = out.transcript.with_label("n1+n2").map(|m| m.payload.to_string()).collect();
        assert_eq!(opened, ["7", "7"]);
    }

    #[test]
    fn commit2_detects_a_false_claim() {
        let z2 = RingSpec::modular(2).unwrap();
        let g = dummy_triangle();
        let mut ledgers = commit2_dummy(&z2, &g, &z2.zero(), &z2.zero(), RunEnv::seeded(1)).unwrap().outcome;
        let env = RunEnv::seeded(0).tamper(|m| (m.label == "n1").then(|| Payload::Element(RingElement::from(1))));
        assert_eq!(
            decommit2_dummy(&z2, &g, &mut ledgers, env).unwrap_err(),
            Error::CheatDetected {
                detector: BOB,
                detail: "claimed n1 = 1 but the opened total implies 0".into()
            }
        );
    }

    #[test]
    fn ot_hand_trace_and_validation() {
        let ring = RingSpec::integers(100).unwrap();
        let g = dummy_triangle();
        let tapes = ScriptedTapes::new().with(0, draws(&ring, &[4, 7, 11]));
        let msgs = els(&ring, &[10, 20, 30]);
        let run = ot_dummy(&ring, &g, &msgs, &[1, 3], RunEnv::with_tapes(tapes)).unwrap();
        assert_eq!(run.outcome, els(&ring, &[10, 30]));
        assert!(run.transcript.messages.iter().all(|m| m.to != crate::engine::Recipient::Party(ALICE)));
        assert_eq!(run.transcript.draws[2], 0);
        assert_eq!(ot_dummy(&ring, &g, &msgs, &[1, 2, 3], RunEnv::seeded(1)).unwrap().outcome, msgs);
        let zeros = els(&ring, &[0, 0, 0]);
        assert_eq!(ot_dummy(&ring, &g, &zeros, &[2], RunEnv::seeded(1)).unwrap().outcome, els(&ring, &[0]));
        assert!(ot_dummy(&ring, &g, &msgs, &[4], RunEnv::seeded(1)).is_err());
        assert!(ot_dummy(&ring, &g, &msgs, &[2, 2], RunEnv::seeded(1)).is_err());
        assert!(ot_dummy(&ring, &g, &msgs, &[], RunEnv::seeded(1)).is_err());
    }

    #[test]
    fn commit_k_opens_correctly_and_catches_a_bad_split() {
        let ring = RingSpec::modular(251).unwrap();
        let g = ChannelGraph::cycle(5).unwrap();
        let xs = els(&ring, &[9, 8, 7, 6, 5]);
        assert_eq!(commit_k(&ring, &g, &xs, RunEnv::seeded(3)).unwrap().outcome, xs);
        let env = RunEnv::seeded(3).tamper(|m| {
            (m.label == "open" && m.from == PartyId(2)).then(|| {
                let mut v = m.payload.as_elements().unwrap().to_vec();
                v[0] = RingElement(&v[0].0 + 1);
                Payload::Elements(v)
            })
        });
        assert!(matches!(commit_k(&ring, &g, &xs, env), Err(Error::CheatDetected { .. })));
    }
}
