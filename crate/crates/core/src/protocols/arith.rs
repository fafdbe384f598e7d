//! Sums, products, power sums, rating, two worked function examples and the
//! millionaires comparison.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::{all_parties, cycle_cover, expect_len, neighbours, single_cycle};
use crate::config::ProtocolConfig;
use crate::engine::{self, Ctx, Message, Party, Protocol, Run, RunEnv, Transcript};
use crate::error::{Error, Result};
use crate::ring::{RingElement, RingSpec};
use crate::topology::{Capability, ChannelGraph, PartyId, Security, TopologyError};

fn same_everywhere(results: Vec<Option<RingElement>>) -> Result<RingElement> {
    let mut it = results.into_iter();
    let first = it
        .next()
        .flatten()
        .ok_or_else(|| Error::protocol("party finished without a result"))?;
    for r in it {
        if r.as_ref() != Some(&first) {
            return Err(Error::protocol("parties disagree on the result"));
        }
    }
    Ok(first)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateOp {
    Sum,
    Product,
}

/// Noised pass around each secure cycle, publication, then broadcast of the noise.
///
/// For [`AggregateOp::Sum`] each party adds `n_i + n0_i`; the cycle's initiator
/// (its smallest vertex) strips its own `n0`, publishes `S`, and every other
/// party broadcasts its `n0` so everyone can subtract. The product variant
/// multiplies by `n_i * n0_i` with unit noise and divides instead. Any
/// disjoint union of secure cycles of length at least 3 works.
#[derive(Debug, Clone)]
pub struct CycleAggregate {
    pub op: AggregateOp,
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: Vec<RingElement>,
    pub roster: Option<Vec<Capability>>,
}

impl CycleAggregate {
    pub fn sum(ring: RingSpec, graph: ChannelGraph, inputs: Vec<RingElement>) -> Self {
        CycleAggregate {
            op: AggregateOp::Sum,
            ring,
            graph,
            inputs,
            roster: None,
        }
    }

    pub fn product(ring: RingSpec, graph: ChannelGraph, inputs: Vec<RingElement>) -> Self {
        CycleAggregate {
            op: AggregateOp::Product,
            ..Self::sum(ring, graph, inputs)
        }
    }

    /// Overrides the all-`Full` roster (to exercise the dummy gate).
    pub fn with_roster(mut self, roster: Vec<Capability>) -> Self {
        self.roster = Some(roster);
        self
    }

    fn published_label(&self) -> &'static str {
        match self.op {
            AggregateOp::Sum => "S",
            AggregateOp::Product => "P",
        }
    }
}

pub struct AggregateParty {
    op: AggregateOp,
    me: usize,
    input: RingElement,
    cycle: Vec<usize>,
    noise: Option<RingElement>,
    published: Vec<RingElement>,
    noises: Vec<RingElement>,
    expect_published: usize,
    expect_noises: usize,
    published_label: &'static str,
    result: Option<RingElement>,
}

impl AggregateParty {
    fn combine(&self, ring: &RingSpec, a: &RingElement, b: &RingElement) -> RingElement {
        match self.op {
            AggregateOp::Sum => ring.add(a, b),
            AggregateOp::Product => ring.mul(a, b),
        }
    }

    fn identity(&self, ring: &RingSpec) -> RingElement {
        match self.op {
            AggregateOp::Sum => ring.zero(),
            AggregateOp::Product => ring.one(),
        }
    }

    fn draw_noise(&mut self, ctx: &mut Ctx<'_>) -> Result<RingElement> {
        let n0 = ctx.sample_noise(self.op == AggregateOp::Product)?;
        ctx.record("n0", n0.clone());
        self.noise = Some(n0.clone());
        Ok(n0)
    }

    /// Folds own input and noise into `m` and passes it on.
    fn contribute(&mut self, m: &RingElement, ctx: &mut Ctx<'_>) -> Result<()> {
        let n0 = self.draw_noise(ctx)?;
        let ring = ctx.ring().clone();
        let own = self.combine(&ring, &self.input, &n0);
        let out = self.combine(&ring, m, &own);
        let (_, next, _) = neighbours(&self.cycle, self.me);
        ctx.send(PartyId(next), "partial", out)
    }

    fn try_finish(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if self.result.is_some()
            || self.published.len() < self.expect_published
            || self.noises.len() < self.expect_noises
        {
            return Ok(());
        }
        let ring = ctx.ring().clone();
        let result = match self.op {
            AggregateOp::Sum => ring.sub(&ring.sum(&self.published), &ring.sum(&self.noises)),
            AggregateOp::Product => ring.exact_div(&ring.product(&self.published), &ring.product(&self.noises))?,
        };
        ctx.record("result", result.clone());
        self.result = Some(result);
        Ok(())
    }
}

impl Party for AggregateParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        ctx.record("input", self.input.clone());
        if self.cycle[0] == self.me {
            let start = self.identity(&ctx.ring().clone());
            self.contribute(&start, ctx)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        match msg.label.as_str() {
            "partial" => {
                let m = msg.element()?;
                if self.cycle[0] == self.me {
                    let n0 = self.noise.clone().ok_or_else(|| Error::protocol("initiator lost its noise"))?;
                    let total = match self.op {
                        AggregateOp::Sum => ring.sub(m, &n0),
                        AggregateOp::Product => ring.exact_div(m, &n0)?,
                    };
                    ctx.broadcast(self.published_label, total.clone())?;
                    self.published.push(total);
                } else {
                    self.contribute(m, ctx)?;
                }
            }
            "n0" => self.noises.push(msg.element()?.clone()),
            l if l == self.published_label => {
                self.published.push(msg.element()?.clone());
                if msg.from.0 == self.cycle[0] && self.cycle[0] != self.me {
                    let n0 = self.noise.clone().ok_or_else(|| Error::protocol("noise missing at publication"))?;
                    ctx.broadcast("n0", n0.clone())?;
                    self.noises.push(n0);
                }
            }
            other => return Err(Error::protocol(format!("unexpected message {other}"))),
        }
        self.try_finish(ctx)
    }
}

impl Protocol for CycleAggregate {
    type Party = AggregateParty;
    type Outcome = RingElement;

    fn name(&self) -> &'static str {
        match self.op {
            AggregateOp::Sum => "sum",
            AggregateOp::Product => "product",
        }
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        self.roster
            .clone()
            .unwrap_or_else(|| vec![Capability::Full; self.graph.k()])
    }

    fn check_topology(&self) -> Result<()> {
        cycle_cover(&self.graph, &all_parties(&self.graph)).map(|_| ())
    }

    fn parties(&self) -> Result<Vec<AggregateParty>> {
        let k = self.graph.k();
        expect_len(&self.inputs, k, "inputs")?;
        for x in &self.inputs {
            self.ring.check(x)?;
            if self.op == AggregateOp::Product && !self.ring.is_legal_divisor(x) {
                return Err(Error::input(format!("product inputs must be units or nonzero, got {x}")));
            }
        }
        let cycles = cycle_cover(&self.graph, &all_parties(&self.graph))?;
        let mut of = vec![0; k];
        for (ci, c) in cycles.iter().enumerate() {
            for &v in c {
                of[v] = ci;
            }
        }
        Ok((0..k)
            .map(|i| AggregateParty {
                op: self.op,
                me: i,
                input: self.inputs[i].clone(),
                cycle: cycles[of[i]].clone(),
                noise: None,
                published: Vec::new(),
                noises: Vec::new(),
                expect_published: cycles.len(),
                expect_noises: k - cycles.len(),
                published_label: self.published_label(),
                result: None,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<AggregateParty>, _: &Transcript) -> Result<RingElement> {
        same_everywhere(parties.into_iter().map(|p| p.result).collect())
    }

    fn config(&self) -> serde_json::Value {
        match self.op {
            AggregateOp::Sum => ProtocolConfig::Sum {
                inputs: self.inputs.clone(),
            },
            AggregateOp::Product => ProtocolConfig::Product {
                inputs: self.inputs.clone(),
            },
        }
        .to_value()
    }
}

pub fn secure_sum(ring: &RingSpec, graph: &ChannelGraph, inputs: &[RingElement], env: RunEnv<'_>) -> Result<Run<RingElement>> {
    engine::run(&CycleAggregate::sum(ring.clone(), graph.clone(), inputs.to_vec()), env)
}

pub fn secure_product(
    ring: &RingSpec,
    graph: &ChannelGraph,
    inputs: &[RingElement],
    env: RunEnv<'_>,
) -> Result<Run<RingElement>> {
    engine::run(&CycleAggregate::product(ring.clone(), graph.clone(), inputs.to_vec()), env)
}

/// Parties `0..k` on a secure cycle, plus a boss at index `k` with insecure
/// links to `P0` and `P(k-1)`.
pub fn rating_graph(k: usize) -> Result<ChannelGraph> {
    let cycle = ChannelGraph::cycle(k)?;
    let mut g = ChannelGraph::new(k + 1);
    for (a, b, s) in cycle.edges() {
        g.add_edge(a, b, s)?;
    }
    g.add_edge(k - 1, k, Security::Insecure)?;
    g.add_edge(0, k, Security::Insecure)?;
    Ok(g)
}

/// Rating over insecure channels: a forward noised pass ends at the boss, then
/// the noise is collected in the opposite direction and also handed to the
/// boss, who subtracts. The boss is the last party and never draws randomness.
#[derive(Debug, Clone)]
pub struct SecureRating {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: Vec<RingElement>,
}

impl SecureRating {
    fn boss(&self) -> usize {
        self.graph.k() - 1
    }

    fn cycle(&self) -> Result<Vec<usize>> {
        let players: Vec<usize> = (0..self.boss()).collect();
        single_cycle(&self.graph, &players)
    }
}

pub enum RatingParty {
    Player {
        me: usize,
        input: RingElement,
        cycle: Vec<usize>,
        boss: usize,
        noise: Option<RingElement>,
    },
    Boss {
        forward: Option<RingElement>,
        adjust: Option<RingElement>,
        result: Option<RingElement>,
    },
}

impl Party for RatingParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if let RatingParty::Player {
            me,
            input,
            cycle,
            noise,
            ..
        } = self
        {
            ctx.record("input", input.clone());
            if cycle[0] == *me {
                let n0 = ctx.sample_noise(false)?;
                ctx.record("n0", n0.clone());
                let out = ctx.ring().add(input, &n0);
                *noise = Some(n0);
                ctx.send(PartyId(cycle[1]), "forward", out)?;
            }
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        let m = msg.element()?.clone();
        match self {
            RatingParty::Player {
                me,
                input,
                cycle,
                boss,
                noise,
            } => {
                let (pos, next, prev) = neighbours(cycle, *me);
                let last = pos + 1 == cycle.len();
                match msg.label.as_str() {
                    "forward" => {
                        let n0 = ctx.sample_noise(false)?;
                        ctx.record("n0", n0.clone());
                        let out = ring.add(&m, &ring.add(input, &n0));
                        *noise = Some(n0.clone());
                        if last {
                            ctx.send(PartyId(*boss), "forward", out)?;
                            ctx.send(PartyId(prev), "adjust", n0)?;
                        } else {
                            ctx.send(PartyId(next), "forward", out)?;
                        }
                    }
                    "adjust" => {
                        let n0 = noise.clone().ok_or_else(|| Error::protocol("adjustment before forward pass"))?;
                        let out = ring.add(&m, &n0);
                        if pos == 0 {
                            ctx.send(PartyId(*boss), "adjust", out)?;
                        } else {
                            ctx.send(PartyId(prev), "adjust", out)?;
                        }
                    }
                    other => return Err(Error::protocol(format!("unexpected message {other}"))),
                }
            }
            RatingParty::Boss {
                forward,
                adjust,
                result,
            } => {
                match msg.label.as_str() {
                    "forward" => *forward = Some(m),
                    "adjust" => *adjust = Some(m),
                    other => return Err(Error::protocol(format!("unexpected message {other}"))),
                }
                if let (Some(f), Some(a)) = (forward.as_ref(), adjust.as_ref()) {
                    let r = ring.sub(f, a);
                    ctx.record("result", r.clone());
                    *result = Some(r);
                }
            }
        }
        Ok(())
    }
}

impl Protocol for SecureRating {
    type Party = RatingParty;
    type Outcome = RingElement;

    fn name(&self) -> &'static str {
        "rating"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        let mut r = vec![Capability::Full; self.boss()];
        r.push(Capability::Dummy);
        r
    }

    fn check_topology(&self) -> Result<()> {
        if self.graph.k() < 4 {
            return Err(TopologyError::TooFewParties(self.graph.k().saturating_sub(1)).into());
        }
        let cycle = self.cycle()?;
        let b = self.boss();
        self.graph.require_channels(&[
            (cycle[0], b, Security::Insecure),
            (cycle[cycle.len() - 1], b, Security::Insecure),
        ])?;
        Ok(())
    }

    fn parties(&self) -> Result<Vec<RatingParty>> {
        let b = self.boss();
        expect_len(&self.inputs, b, "inputs")?;
        self.inputs.iter().try_for_each(|x| self.ring.check(x))?;
        let cycle = self.cycle()?;
        let mut ps: Vec<RatingParty> = (0..b)
            .map(|i| RatingParty::Player {
                me: i,
                input: self.inputs[i].clone(),
                cycle: cycle.clone(),
                boss: b,
                noise: None,
            })
            .collect();
        ps.push(RatingParty::Boss {
            forward: None,
            adjust: None,
            result: None,
        });
        Ok(ps)
    }

    fn outcome(&self, mut parties: Vec<RatingParty>, _: &Transcript) -> Result<RingElement> {
        match parties.pop() {
            Some(RatingParty::Boss { result: Some(r), .. }) => Ok(r),
            _ => Err(Error::protocol("boss finished without a result")),
        }
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Rating {
            inputs: self.inputs.clone(),
        }
        .to_value()
    }
}

pub fn secure_rating(ring: &RingSpec, graph: &ChannelGraph, inputs: &[RingElement], env: RunEnv<'_>) -> Result<Run<RingElement>> {
    engine::run(
        &SecureRating {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: inputs.to_vec(),
        },
        env,
    )
}

/// Sum of `r`-th powers with one random mask `n0` drawn by the cycle's first
/// party, who also ends up with the result. No per-party noise.
#[derive(Debug, Clone)]
pub struct SumOfPowers {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: Vec<RingElement>,
    pub power: u32,
}

pub struct PowerParty {
    me: usize,
    input: RingElement,
    power: u32,
    cycle: Vec<usize>,
    mask: Option<RingElement>,
    result: Option<RingElement>,
}

impl Party for PowerParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        ctx.record("input", self.input.clone());
        if self.cycle[0] == self.me {
            let n0 = ctx.sample_noise(false)?;
            ctx.record("n0", n0.clone());
            self.mask = Some(n0.clone());
            ctx.send(PartyId(self.cycle[1]), "partial", n0)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        let m = msg.element()?;
        let own = ring.pow(&self.input, self.power);
        if let Some(n0) = &self.mask {
            let r = ring.sub(m, &ring.sub(n0, &own));
            ctx.record("result", r.clone());
            self.result = Some(r);
        } else {
            let (_, next, _) = neighbours(&self.cycle, self.me);
            ctx.send(PartyId(next), "partial", ring.add(m, &own))?;
        }
        Ok(())
    }
}

impl Protocol for SumOfPowers {
    type Party = PowerParty;
    type Outcome = RingElement;

    fn name(&self) -> &'static str {
        "power_sum"
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

    fn parties(&self) -> Result<Vec<PowerParty>> {
        if self.power == 0 {
            return Err(Error::input("power must be at least 1"));
        }
        expect_len(&self.inputs, self.graph.k(), "inputs")?;
        self.inputs.iter().try_for_each(|x| self.ring.check(x))?;
        let cycle = single_cycle(&self.graph, &all_parties(&self.graph))?;
        Ok((0..self.graph.k())
            .map(|i| PowerParty {
                me: i,
                input: self.inputs[i].clone(),
                power: self.power,
                cycle: cycle.clone(),
                mask: None,
                result: None,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<PowerParty>, _: &Transcript) -> Result<RingElement> {
        parties
            .into_iter()
            .find_map(|p| p.result)
            .ok_or_else(|| Error::protocol("no party finished"))
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::PowerSum {
            inputs: self.inputs.clone(),
            power: self.power,
        }
        .to_value()
    }
}

pub fn sum_of_powers(
    ring: &RingSpec,
    graph: &ChannelGraph,
    inputs: &[RingElement],
    power: u32,
    env: RunEnv<'_>,
) -> Result<Run<RingElement>> {
    engine::run(
        &SumOfPowers {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: inputs.to_vec(),
            power,
        },
        env,
    )
}

/// Elementary symmetric values `e_1..e_k` from power sums `p_1..p_k` via
/// Newton's identities, `j e_j = sum_{i=1..j} (-1)^(i-1) e_(j-i) p_i`.
///
/// Over `Z` each division must be exact; over `Z_m` every `j <= k` must be
/// invertible, otherwise this refuses.
pub fn symmetric_from_power_sums(ring: &RingSpec, power_sums: &[RingElement]) -> Result<Vec<RingElement>> {
    let mut e = vec![ring.one()];
    for j in 1..=power_sums.len() {
        let mut acc = ring.zero();
        for i in 1..=j {
            let term = ring.mul(&e[j - i], &power_sums[i - 1]);
            acc = if i % 2 == 1 { ring.add(&acc, &term) } else { ring.sub(&acc, &term) };
        }
        let jj = ring.element(j as i64);
        if ring.is_modular() && !ring.is_legal_divisor(&jj) {
            return Err(Error::input(format!("{j} is not invertible in {ring}")));
        }
        e.push(ring.exact_div(&acc, &jj)?);
    }
    e.remove(0);
    Ok(e)
}

/// Runs [`sum_of_powers`] for `r = 1..=k` and applies Newton's identities.
///
/// Not private: the party holding all `k` power sums learns the multiset of
/// inputs (though not who holds which).
pub fn elementary_symmetric(
    ring: &RingSpec,
    graph: &ChannelGraph,
    inputs: &[RingElement],
    seed: u64,
) -> Result<Vec<RingElement>> {
    let mut sums = Vec::new();
    for r in 1..=inputs.len() as u32 {
        sums.push(sum_of_powers(ring, graph, inputs, r, RunEnv::seeded(seed.wrapping_add(r as u64)))?.outcome);
    }
    symmetric_from_power_sums(ring, &sums)
}

fn triangle_check(graph: &ChannelGraph) -> Result<Vec<usize>> {
    graph.require_parties(3)?;
    single_cycle(graph, &[0, 1, 2])
}

/// `n1 n2 + n2 n3` computed at `P1` without forming either product:
/// `P1` sends a mask `n0` to `P2`, `P2` adds `n3` and passes to `P0`, `P0` adds
/// `n1` and returns to `P1`, who unmasks and multiplies by `n2`.
#[derive(Debug, Clone)]
pub struct ExampleF1 {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: Vec<RingElement>,
}

pub struct F1Party {
    me: usize,
    input: RingElement,
    mask: Option<RingElement>,
    result: Option<RingElement>,
}

impl Party for F1Party {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        ctx.record("input", self.input.clone());
        if self.me == 1 {
            let n0 = ctx.sample_noise(false)?;
            ctx.record("n0", n0.clone());
            self.mask = Some(n0.clone());
            ctx.send(PartyId(2), "n0", n0)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        let m = msg.element()?;
        match self.me {
            2 => ctx.send(PartyId(0), "n0+n3", ring.add(m, &self.input)),
            0 => ctx.send(PartyId(1), "n0+n3+n1", ring.add(m, &self.input)),
            _ => {
                let n0 = self.mask.as_ref().ok_or_else(|| Error::protocol("mask missing"))?;
                let r = ring.mul(&ring.sub(m, n0), &self.input);
                ctx.record("result", r.clone());
                self.result = Some(r);
                Ok(())
            }
        }
    }
}

impl Protocol for ExampleF1 {
    type Party = F1Party;
    type Outcome = RingElement;

    fn name(&self) -> &'static str {
        "example_f1"
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
        triangle_check(&self.graph).map(|_| ())
    }

    fn parties(&self) -> Result<Vec<F1Party>> {
        expect_len(&self.inputs, 3, "inputs")?;
        self.inputs.iter().try_for_each(|x| self.ring.check(x))?;
        Ok((0..3)
            .map(|i| F1Party {
                me: i,
                input: self.inputs[i].clone(),
                mask: None,
                result: None,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<F1Party>, _: &Transcript) -> Result<RingElement> {
        parties
            .into_iter()
            .find_map(|p| p.result)
            .ok_or_else(|| Error::protocol("no result"))
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::ExampleF1 {
            inputs: self.inputs.clone(),
        }
        .to_value()
    }
}

pub fn example_f1(ring: &RingSpec, graph: &ChannelGraph, inputs: &[RingElement], env: RunEnv<'_>) -> Result<Run<RingElement>> {
    engine::run(
        &ExampleF1 {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: inputs.to_vec(),
        },
        env,
    )
}

/// The unary function `g` applied by the last party in [`ExampleF2`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum UnaryFn {
    Identity,
    Square,
    Power {
        exp: u32,
    },
    Constant {
        #[serde(deserialize_with = "crate::serde_util::deserialize_bigint", serialize_with = "ser_bigint")]
        value: BigInt,
    },
    /// `a x + b`
    Affine {
        #[serde(deserialize_with = "crate::serde_util::deserialize_bigint", serialize_with = "ser_bigint")]
        a: BigInt,
        #[serde(deserialize_with = "crate::serde_util::deserialize_bigint", serialize_with = "ser_bigint")]
        b: BigInt,
    },
}

fn ser_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl UnaryFn {
    pub fn apply(&self, ring: &RingSpec, x: &RingElement) -> RingElement {
        match self {
            UnaryFn::Identity => x.clone(),
            UnaryFn::Square => ring.mul(x, x),
            UnaryFn::Power { exp } => ring.pow(x, *exp),
            UnaryFn::Constant { value } => ring.element(value.clone()),
            UnaryFn::Affine { a, b } => ring.add(&ring.mul(&ring.element(a.clone()), x), &ring.element(b.clone())),
        }
    }
}

/// `n1 n2 + g(n3)`: `P0` sends a unit mask `a0` to `P1`, `P1` multiplies by `n2`
/// and passes to `P2`, `P2` multiplies by its own unit mask `c0` and passes
/// to `P0`, `P0` multiplies by `n1`, divides by `a0` and sends `n1 n2 c0` back
/// to `P2`, who divides by `c0` and adds `g(n3)`.
#[derive(Debug, Clone)]
pub struct ExampleF2 {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: Vec<RingElement>,
    pub g: UnaryFn,
}

pub struct F2Party {
    me: usize,
    input: RingElement,
    g: UnaryFn,
    mask: Option<RingElement>,
    result: Option<RingElement>,
}

impl Party for F2Party {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        ctx.record("input", self.input.clone());
        if self.me == 0 {
            let a0 = ctx.sample_noise(true)?;
            ctx.record("a0", a0.clone());
            self.mask = Some(a0.clone());
            ctx.send(PartyId(1), "a0", a0)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        let ring = ctx.ring().clone();
        let m = msg.element()?;
        match (self.me, msg.label.as_str()) {
            (1, "a0") => ctx.send(PartyId(2), "a0*n2", ring.mul(m, &self.input)),
            (2, "a0*n2") => {
                let c0 = ctx.sample_noise(true)?;
                ctx.record("c0", c0.clone());
                self.mask = Some(c0.clone());
                ctx.send(PartyId(0), "a0*n2*c0", ring.mul(m, &c0))
            }
            (0, "a0*n2*c0") => {
                let a0 = self.mask.as_ref().ok_or_else(|| Error::protocol("mask missing"))?;
                let out = ring.exact_div(&ring.mul(m, &self.input), a0)?;
                ctx.send(PartyId(2), "n1*n2*c0", out)
            }
            (2, "n1*n2*c0") => {
                let c0 = self.mask.as_ref().ok_or_else(|| Error::protocol("mask missing"))?;
                let r = ring.add(&ring.exact_div(m, c0)?, &self.g.apply(&ring, &self.input));
                ctx.record("result", r.clone());
                self.result = Some(r);
                Ok(())
            }
            (_, other) => Err(Error::protocol(format!("unexpected message {other}"))),
        }
    }
}

impl Protocol for ExampleF2 {
    type Party = F2Party;
    type Outcome = RingElement;

    fn name(&self) -> &'static str {
        "example_f2"
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
        triangle_check(&self.graph).map(|_| ())
    }

    fn parties(&self) -> Result<Vec<F2Party>> {
        expect_len(&self.inputs, 3, "inputs")?;
        self.inputs.iter().try_for_each(|x| self.ring.check(x))?;
        Ok((0..3)
            .map(|i| F2Party {
                me: i,
                input: self.inputs[i].clone(),
                g: self.g.clone(),
                mask: None,
                result: None,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<F2Party>, _: &Transcript) -> Result<RingElement> {
        parties
            .into_iter()
            .find_map(|p| p.result)
            .ok_or_else(|| Error::protocol("no result"))
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::ExampleF2 {
            inputs: self.inputs.clone(),
            g: self.g.clone(),
        }
        .to_value()
    }
}

pub fn example_f2(
    ring: &RingSpec,
    graph: &ChannelGraph,
    inputs: &[RingElement],
    g: &UnaryFn,
    env: RunEnv<'_>,
) -> Result<Run<RingElement>> {
    engine::run(
        &ExampleF2 {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: inputs.to_vec(),
            g: g.clone(),
        },
        env,
    )
}

/// Result of a comparison, from the first party's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// `n1 > n2`
    Greater,
    /// `n1 < n2`
    Less,
    Equal,
}

impl Verdict {
    pub fn of(diff: &BigInt) -> Verdict {
        if diff.is_positive() {
            Verdict::Greater
        } else if diff.is_negative() {
            Verdict::Less
        } else {
            Verdict::Equal
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            Verdict::Greater => "greater",
            Verdict::Less => "less",
            Verdict::Equal => "equal",
        }
    }

    pub fn from_token(t: &str) -> Result<Verdict> {
        match t {
            "greater" => Ok(Verdict::Greater),
            "less" => Ok(Verdict::Less),
            "equal" => Ok(Verdict::Equal),
            other => Err(Error::protocol(format!("bad verdict {other:?}"))),
        }
    }
}

/// Parties of the dummy-assisted two-party protocols.
pub const ALICE: PartyId = PartyId(0);
pub const BOB: PartyId = PartyId(1);
pub const DUMMY: PartyId = PartyId(2);

/// Secure triangle `A`-`B`, `A`-`D`, `B`-`D`.
pub fn dummy_triangle() -> ChannelGraph {
    ChannelGraph::cycle(3).expect("3-cycle")
}

pub(crate) fn check_dummy_triangle(graph: &ChannelGraph) -> Result<()> {
    graph.require_parties(3)?;
    graph.require_channels(&[
        (0, 1, Security::Secure),
        (0, 2, Security::Secure),
        (1, 2, Security::Secure),
    ])?;
    Ok(())
}

/// Two-party comparison through a dummy.
///
/// Each real party splits its number as `n = n+ - n-`, gives `n-` to the other,
/// and sends `n+ + (other's n-)` to the dummy, whose difference of the two is
/// `n1 - n2`. Over `Z_m` the dummy reads the centered representative, which
/// is the true difference only when `2 |n1 - n2| < m`; inputs outside that
/// range are rejected.
#[derive(Debug, Clone)]
pub struct Millionaires {
    pub ring: RingSpec,
    pub graph: ChannelGraph,
    pub inputs: [RingElement; 2],
}

pub enum MillionairesParty {
    Real {
        input: RingElement,
        plus: Option<RingElement>,
        verdict: Option<Verdict>,
    },
    Dummy {
        got: BTreeMap<usize, RingElement>,
        verdict: Option<Verdict>,
    },
}

impl Party for MillionairesParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if let MillionairesParty::Real { input, plus, .. } = self {
            ctx.record("input", input.clone());
            let minus = ctx.sample_noise(false)?;
            let p = ctx.ring().add(input, &minus);
            ctx.record("n-", minus.clone());
            ctx.record("n+", p.clone());
            *plus = Some(p);
            let other = PartyId(1 - ctx.me().0);
            ctx.send(other, "n-", minus)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        match self {
            MillionairesParty::Real { plus, verdict, .. } => match msg.label.as_str() {
                "n-" => {
                    let p = plus.as_ref().ok_or_else(|| Error::protocol("split missing"))?;
                    let out = ctx.ring().add(p, msg.element()?);
                    ctx.send(DUMMY, "n+ + n-", out)
                }
                "verdict" => {
                    *verdict = Some(Verdict::from_token(msg.payload.as_token()?)?);
                    Ok(())
                }
                other => Err(Error::protocol(format!("unexpected message {other}"))),
            },
            MillionairesParty::Dummy { got, verdict } => {
                got.insert(msg.from.0, msg.element()?.clone());
                if let (Some(a), Some(b)) = (got.get(&0), got.get(&1)) {
                    let ring = ctx.ring().clone();
                    let diff = ring.sub(a, b);
                    ctx.record("n1-n2", diff.clone());
                    let v = Verdict::of(&ring.centered(&diff));
                    *verdict = Some(v);
                    ctx.broadcast("verdict", crate::engine::Payload::Token(v.token().into()))?;
                }
                Ok(())
            }
        }
    }
}

impl Protocol for Millionaires {
    type Party = MillionairesParty;
    type Outcome = Verdict;

    fn name(&self) -> &'static str {
        "millionaires"
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

    fn parties(&self) -> Result<Vec<MillionairesParty>> {
        self.inputs.iter().try_for_each(|x| self.ring.check(x))?;
        if let Some(m) = self.ring.modulus() {
            let d: BigInt = (&self.inputs[0].0 - &self.inputs[1].0).abs() * 2;
            if d >= BigInt::from(m.clone()) {
                return Err(Error::input(format!(
                    "over Z_{m} the inputs must satisfy 2|n1 - n2| < {m}"
                )));
            }
        }
        let real = |i: usize| MillionairesParty::Real {
            input: self.inputs[i].clone(),
            plus: None,
            verdict: None,
        };
        Ok(vec![
            real(0),
            real(1),
            MillionairesParty::Dummy {
                got: BTreeMap::new(),
                verdict: None,
            },
        ])
    }

    fn outcome(&self, parties: Vec<MillionairesParty>, _: &Transcript) -> Result<Verdict> {
        let vs: Vec<Option<Verdict>> = parties
            .into_iter()
            .map(|p| match p {
                MillionairesParty::Real { verdict, .. } | MillionairesParty::Dummy { verdict, .. } => verdict,
            })
            .collect();
        match vs[2] {
            Some(v) if vs.iter().all(|x| *x == Some(v)) => Ok(v),
            _ => Err(Error::protocol("verdict not delivered to every party")),
        }
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Millionaires {
            inputs: self.inputs.to_vec(),
        }
        .to_value()
    }
}

pub fn millionaires_compare(
    ring: &RingSpec,
    graph: &ChannelGraph,
    n1: &RingElement,
    n2: &RingElement,
    env: RunEnv<'_>,
) -> Result<Run<Verdict>> {
    engine::run(
        &Millionaires {
            ring: ring.clone(),
            graph: graph.clone(),
            inputs: [n1.clone(), n2.clone()],
        },
        env,
    )
}

/// Bit-by-bit comparison, most significant bit first, each round a
/// [`Millionaires`] exchange over `Z_3` on the two bits. The dummy announces
/// after every round and the parties stop at the first nonzero difference.
#[derive(Debug, Clone)]
pub struct MillionairesBitwise {
    pub graph: ChannelGraph,
    pub inputs: [u64; 2],
    pub bit_width: u32,
    ring: RingSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitwiseOutcome {
    pub verdict: Verdict,
    /// Bit position (0 = least significant) where the numbers first differ.
    pub deciding_bit: Option<u32>,
}

impl MillionairesBitwise {
    pub fn new(graph: ChannelGraph, n1: u64, n2: u64, bit_width: u32) -> Result<Self> {
        if bit_width == 0 || bit_width > 64 {
            return Err(Error::input("bit width must be in 1..=64"));
        }
        for n in [n1, n2] {
            if bit_width < 64 && n >> bit_width != 0 {
                return Err(Error::input(format!("{n} does not fit in {bit_width} bits")));
            }
        }
        Ok(MillionairesBitwise {
            graph,
            inputs: [n1, n2],
            bit_width,
            ring: RingSpec::modular(3).expect("Z_3"),
        })
    }
}

pub enum BitwiseParty {
    Real {
        input: u64,
        bit: u32,
        plus: Option<RingElement>,
        outcome: Option<BitwiseOutcome>,
    },
    Dummy {
        bit: u32,
        got: BTreeMap<usize, RingElement>,
        outcome: Option<BitwiseOutcome>,
    },
}

fn bit_round(ctx: &mut Ctx<'_>, input: u64, bit: u32, plus: &mut Option<RingElement>) -> Result<()> {
    let ring = ctx.ring().clone();
    let b = ring.element((input >> bit) & 1);
    let minus = ctx.sample_noise(false)?;
    *plus = Some(ring.add(&b, &minus));
    ctx.send(PartyId(1 - ctx.me().0), format!("n-[{bit}]"), minus)
}

impl Party for BitwiseParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if let BitwiseParty::Real { input, bit, plus, .. } = self {
            ctx.record("input", crate::engine::Payload::Integer(*input));
            bit_round(ctx, *input, *bit, plus)?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        match self {
            BitwiseParty::Real {
                input,
                bit,
                plus,
                outcome,
            } => {
                if msg.label.starts_with("n-") {
                    let p = plus.take().ok_or_else(|| Error::protocol("split missing"))?;
                    let out = ctx.ring().add(&p, msg.element()?);
                    return ctx.send(DUMMY, format!("n+ + n-[{bit}]"), out);
                }
                let v = Verdict::from_token(msg.payload.as_token()?)?;
                match v {
                    Verdict::Equal if *bit > 0 => {
                        *bit -= 1;
                        bit_round(ctx, *input, *bit, plus)?;
                    }
                    Verdict::Equal => {
                        *outcome = Some(BitwiseOutcome {
                            verdict: v,
                            deciding_bit: None,
                        })
                    }
                    _ => {
                        *outcome = Some(BitwiseOutcome {
                            verdict: v,
                            deciding_bit: Some(*bit),
                        })
                    }
                }
                Ok(())
            }
            BitwiseParty::Dummy { bit, got, outcome } => {
                got.insert(msg.from.0, msg.element()?.clone());
                if let (Some(a), Some(b)) = (got.get(&0), got.get(&1)) {
                    let ring = ctx.ring().clone();
                    let v = Verdict::of(&ring.centered(&ring.sub(a, b)));
                    got.clear();
                    ctx.broadcast(format!("verdict[{bit}]"), crate::engine::Payload::Token(v.token().into()))?;
                    if v != Verdict::Equal {
                        *outcome = Some(BitwiseOutcome {
                            verdict: v,
                            deciding_bit: Some(*bit),
                        });
                    } else if *bit == 0 {
                        *outcome = Some(BitwiseOutcome {
                            verdict: v,
                            deciding_bit: None,
                        });
                    } else {
                        *bit -= 1;
                    }
                }
                Ok(())
            }
        }
    }
}

impl Protocol for MillionairesBitwise {
    type Party = BitwiseParty;
    type Outcome = BitwiseOutcome;

    fn name(&self) -> &'static str {
        "millionaires_bitwise"
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

    fn parties(&self) -> Result<Vec<BitwiseParty>> {
        let top = self.bit_width - 1;
        let real = |i: usize| BitwiseParty::Real {
            input: self.inputs[i],
            bit: top,
            plus: None,
            outcome: None,
        };
        Ok(vec![
            real(0),
            real(1),
            BitwiseParty::Dummy {
                bit: top,
                got: BTreeMap::new(),
                outcome: None,
            },
        ])
    }

    fn outcome(&self, parties: Vec<BitwiseParty>, _: &Transcript) -> Result<BitwiseOutcome> {
        let os: Vec<Option<BitwiseOutcome>> = parties
            .into_iter()
            .map(|p| match p {
                BitwiseParty::Real { outcome, .. } | BitwiseParty::Dummy { outcome, .. } => outcome,
            })
            .collect();
        match os[2] {
            Some(o) if os.iter().all(|x| *x == Some(o)) => Ok(o),
            _ => Err(Error::protocol("parties disagree on the comparison")),
        }
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::MillionairesBitwise {
            inputs: self.inputs.to_vec(),
            bit_width: self.bit_width,
        }
        .to_value()
    }
}

pub fn millionaires_bitwise(
    graph: &ChannelGraph,
    n1: u64,
    n2: u64,
    bit_width: u32,
    env: RunEnv<'_>,
) -> Result<Run<BitwiseOutcome>> {
    engine::run(&MillionairesBitwise::new(graph.clone(), n1, n2, bit_width)?, env)
}

/// Smallest bit width holding every value below `bound`.
pub fn bits_for(bound: u64) -> u32 {
    (64 - bound.saturating_sub(1).leading_zeros()).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{eavesdropper_view, extract_view, EntryKind, Payload};
    use crate::tape::ScriptedTapes;
    use num_bigint::BigUint;

    fn z() -> RingSpec {
        RingSpec::integers(1000).unwrap()
    }

    fn els(ring: &RingSpec, xs: &[i64]) -> Vec<RingElement> {
        xs.iter().map(|&x| ring.element(x)).collect()
    }

    fn draws(ring: &RingSpec, xs: &[i64], unit: bool) -> Vec<BigUint> {
        xs.iter()
            .map(|&x| ring.noise_to_draw(&ring.element(x), unit).unwrap())
            .collect()
    }

    #[test]
    fn sum_examples() {
        let g3 = ChannelGraph::cycle(3).unwrap();
        for (ring, xs, want) in [
            (z(), vec![0, 0, 0], 0),
            (z(), vec![3, 5, 7], 15),
        ] {
            let r = secure_sum(&ring, &g3, &els(&ring, &xs), RunEnv::seeded(1)).unwrap();
            assert_eq!(r.outcome, ring.element(want));
        }
        let z2 = RingSpec::modular(2).unwrap();
        let g4 = ChannelGraph::cycle(4).unwrap();
        let r = secure_sum(&z2, &g4, &els(&z2, &[1, 1, 1, 1]), RunEnv::seeded(1)).unwrap();
        assert_eq!(r.outcome, z2.zero());
    }

    #[test]
    fn sum_message_pattern() {
        let ring = z();
        let g = ChannelGraph::cycle(3).unwrap();
        let t = secure_sum(&ring, &g, &els(&ring, &[3, 5, 7]), RunEnv::seeded(7)).unwrap().transcript;
        let labels: Vec<&str> = t.messages.iter().map(|m| m.label.as_str()).collect();
        assert_eq!(labels, ["partial", "partial", "partial", "S", "n0", "n0"]);
        let v = extract_view(&t, PartyId(1)).unwrap();
        assert_eq!(v.of_kind(EntryKind::Received).count(), 1);
        assert_eq!(v.of_kind(EntryKind::Sent).count(), 1);
        let eve = eavesdropper_view(&t);
        assert_eq!(eve.entries.len(), 3);
        assert!(eve.entries.iter().all(|e| e.kind == EntryKind::Broadcast));
    }

    #[test]
    fn sum_over_disjoint_cycles() {
        let ring = RingSpec::modular(251).unwrap();
        let g = ChannelGraph::disjoint_cycles(&[3, 4]).unwrap();
        let xs = els(&ring, &[1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(secure_sum(&ring, &g, &xs, RunEnv::seeded(3)).unwrap().outcome, ring.element(28));
    }

    #[test]
    fn sum_rejects_bad_graphs_and_dummies() {
        let ring = z();
        let path = ChannelGraph::from_edges(3, [(0, 1, Security::Secure), (1, 2, Security::Secure)]).unwrap();
        assert!(matches!(
            secure_sum(&ring, &path, &els(&ring, &[1, 2, 3]), RunEnv::seeded(7)),
            Err(Error::Topology(_))
        ));
        let p = CycleAggregate::sum(ring.clone(), ChannelGraph::cycle(3).unwrap(), els(&ring, &[1, 2, 3]))
            .with_roster(vec![Capability::Full, Capability::Dummy, Capability::Full]);
        assert_eq!(
            engine::run(&p, RunEnv::seeded(7)).unwrap_err(),
            Error::DummyRandomness { party: PartyId(1) }
        );
    }

    #[test]
    fn rating_hand_trace() {
        let ring = z();
        let g = rating_graph(3).unwrap();
        let tapes = ScriptedTapes::new()
            .with(0, draws(&ring, &[1], false))
            .with(1, draws(&ring, &[2], false))
            .with(2, draws(&ring, &[3], false));
        let r = secure_rating(&ring, &g, &els(&ring, &[3, 5, 7]), RunEnv::with_tapes(tapes)).unwrap();
        assert_eq!(r.outcome, ring.element(15));
        let eve = eavesdropper_view(&r.transcript);
        let seen: Vec<Payload> = eve.entries.iter().map(|e| e.value.clone()).collect();
        assert_eq!(seen, vec![Payload::Element(ring.element(21)), Payload::Element(ring.element(6))]);
        assert_eq!(r.transcript.draws[3], 0);
    }

    #[test]
    fn product_examples() {
        let g = ChannelGraph::cycle(3).unwrap();
        let ring = z();
        for (xs, want) in [(vec![1, 1, 1], 1), (vec![2, 3, 5], 30)] {
            let r = secure_product(&ring, &g, &els(&ring, &xs), RunEnv::seeded(2)).unwrap();
            assert_eq!(r.outcome, ring.element(want));
        }
        let z7 = RingSpec::modular(7).unwrap();
        let r = secure_product(&z7, &g, &els(&z7, &[2, 3, 4]), RunEnv::seeded(2)).unwrap();
        assert_eq!(r.outcome, z7.element(3));
        assert!(matches!(
            secure_product(&z7, &g, &els(&z7, &[0, 3, 4]), RunEnv::seeded(2)),
            Err(Error::InvalidInput(_))
        ));
        let z6 = RingSpec::modular(6).unwrap();
        assert!(secure_product(&z6, &g, &els(&z6, &[2, 1, 1]), RunEnv::seeded(2)).is_err());
    }

    #[test]
    fn power_sum_examples() {
        let g = ChannelGraph::cycle(3).unwrap();
        let ring = z();
        for (xs, r, want) in [(vec![3, 5, 7], 1, 15), (vec![1, 2, 3], 2, 14), (vec![0, 0, 0], 3, 0)] {
            let run = sum_of_powers(&ring, &g, &els(&ring, &xs), r, RunEnv::seeded(5)).unwrap();
            assert_eq!(run.outcome, ring.element(want));
            assert_eq!(run.transcript.draws, vec![1, 0, 0]);
        }
    }

    #[test]
    fn newton_identities() {
        let ring = z();
        assert_eq!(
            symmetric_from_power_sums(&ring, &els(&ring, &[6, 14, 36])).unwrap(),
            els(&ring, &[6, 11, 6])
        );
        assert_eq!(
            symmetric_from_power_sums(&ring, &els(&ring, &[0, 0, 0])).unwrap(),
            els(&ring, &[0, 0, 0])
        );
        assert_eq!(symmetric_from_power_sums(&ring, &els(&ring, &[9])).unwrap(), els(&ring, &[9]));
        let z4 = RingSpec::modular(4).unwrap();
        assert!(symmetric_from_power_sums(&z4, &els(&z4, &[1, 1])).is_err());
        let z7 = RingSpec::modular(7).unwrap();
        assert_eq!(
            symmetric_from_power_sums(&z7, &els(&z7, &[6, 0, 1])).unwrap(),
            els(&z7, &[6, 4, 6])
        );
        let g = ChannelGraph::cycle(3).unwrap();
        assert_eq!(
            elementary_symmetric(&ring, &g, &els(&ring, &[1, 2, 3]), 4).unwrap(),
            els(&ring, &[6, 11, 6])
        );
    }

    #[test]
    fn function_examples() {
        let g = ChannelGraph::cycle(3).unwrap();
        let ring = z();
        for (xs, want) in [(vec![1, 1, 1], 2), (vec![5, 0, 7], 0), (vec![2, 3, 4], 18)] {
            assert_eq!(
                example_f1(&ring, &g, &els(&ring, &xs), RunEnv::seeded(9)).unwrap().outcome,
                ring.element(want)
            );
        }
        for (xs, gf, want) in [
            (vec![2, 3, 4], UnaryFn::Square, 22),
            (vec![0, 0, 5], UnaryFn::Identity, 5),
            (vec![2, 3, 0], UnaryFn::Constant { value: 0.into() }, 6),
        ] {
            assert_eq!(
                example_f2(&ring, &g, &els(&ring, &xs), &gf, RunEnv::seeded(9)).unwrap().outcome,
                ring.element(want)
            );
        }
    }

    #[test]
    fn millionaires_hand_trace() {
        let ring = z();
        let g = dummy_triangle();
        let tapes = ScriptedTapes::new()
            .with(0, draws(&ring, &[2], false))
            .with(1, draws(&ring, &[1], false));
        let r = millionaires_compare(&ring, &g, &ring.element(5), &ring.element(3), RunEnv::with_tapes(tapes)).unwrap();
        assert_eq!(r.outcome, Verdict::Greater);
        let to_d: Vec<String> = r
            .transcript
            .messages
            .iter()
            .filter(|m| m.to == crate::engine::Recipient::Party(DUMMY))
            .map(|m| m.payload.to_string())
            .collect();
        // B handles A's message first, so its 4 + 2 reaches D before A's 7 + 1
        assert_eq!(to_d, ["6", "8"]);
        assert_eq!(r.transcript.local(DUMMY, "n1-n2"), Some(&Payload::Element(ring.element(2))));
        assert_eq!(r.transcript.draws[2], 0);
        for (a, b, v) in [(4, 4, Verdict::Equal), (1, 9, Verdict::Less)] {
            let r = millionaires_compare(&ring, &g, &ring.element(a), &ring.element(b), RunEnv::seeded(1)).unwrap();
            assert_eq!(r.outcome, v);
        }
        let z11 = RingSpec::modular(11).unwrap();
        assert!(millionaires_compare(&z11, &g, &z11.element(9), &z11.element(1), RunEnv::seeded(1)).is_err());
        assert_eq!(
            millionaires_compare(&z11, &g, &z11.element(1), &z11.element(6), RunEnv::seeded(1))
                .unwrap()
                .outcome,
            Verdict::Less
        );
    }

    #[test]
    fn bitwise_examples() {
        let g = dummy_triangle();
        let r = millionaires_bitwise(&g, 0b101, 0b011, 3, RunEnv::seeded(1)).unwrap();
        assert_eq!(
            r.outcome,
            BitwiseOutcome {
                verdict: Verdict::Greater,
                deciding_bit: Some(2)
            }
        );
        let r = millionaires_bitwise(&g, 0b100, 0b101, 3, RunEnv::seeded(1)).unwrap();
        assert_eq!(
            r.outcome,
            BitwiseOutcome {
                verdict: Verdict::Less,
                deciding_bit: Some(0)
            }
        );
        let r = millionaires_bitwise(&g, 6, 6, 3, RunEnv::seeded(1)).unwrap();
        assert_eq!(r.outcome.verdict, Verdict::Equal);
        assert_eq!(r.transcript.with_label("verdict[0]").count(), 1);
        assert_eq!(r.transcript.draws[2], 0);
        assert!(millionaires_bitwise(&g, 8, 1, 3, RunEnv::seeded(1)).is_err());
        assert_eq!(bits_for(251), 8);
        assert_eq!(bits_for(2), 1);
    }
}
