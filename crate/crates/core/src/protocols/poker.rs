//! Card dealing: Protocol 1 (random disjoint distribution of `1..=r` around a
//! cycle), Protocol 2 (collective random integers), the Knuth shuffle built on
//! it, and the dummy-player constructions.
//!
//! One engine run covers the whole deal. Public Protocol 2 rounds come first
//! (a quota lottery when `k` does not divide `r`, then the `r-1` shuffle
//! swaps), each published by its receiver, and Protocol 1 follows.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::rc::Rc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Pow;
use serde::{Deserialize, Serialize};

use crate::config::ProtocolConfig;
use crate::engine::{self, Ctx, Message, Party, Payload, Protocol, Run, RunEnv, Transcript};
use crate::error::{Error, Result};
use crate::ring::RingSpec;
use crate::topology::{Capability, ChannelGraph, PartyId, Security, TopologyError};

/// Public outcome of one collective-randomness round.
pub const LOTTERY: &str = "lottery";
pub const SWAP: &str = "swap";
/// Label of Protocol 1 messages carrying an integer.
pub const TOKEN: &str = "token";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealResult {
    pub quotas: Vec<u64>,
    /// Card indices held by each party, sorted. Empty when nothing was distributed.
    pub hands: Vec<Vec<u64>>,
    pub zero_keeper: Option<PartyId>,
    /// `permutation[i - 1]` is the label assigned to card index `i`.
    pub permutation: Option<Vec<u64>>,
    /// Cards consolidated at the dummy dealer, as labels.
    pub residual: Option<Vec<u64>>,
}

impl DealResult {
    pub fn label(&self, index: u64) -> u64 {
        match &self.permutation {
            Some(p) => p[index as usize - 1],
            None => index,
        }
    }

    /// Hands as card labels, sorted.
    pub fn labelled_hands(&self) -> Vec<Vec<u64>> {
        self.hands
            .iter()
            .map(|h| {
                let mut l: Vec<u64> = h.iter().map(|&i| self.label(i)).collect();
                l.sort_unstable();
                l
            })
            .collect()
    }

    pub fn hand_sizes(&self) -> Vec<usize> {
        self.hands.iter().map(Vec::len).collect()
    }
}

/// `floor(r/n)` each, plus one for the first `r mod n` parties of the list
/// produced by a partial Knuth shuffle of `0..n` driven by `draws`.
pub fn quotas_from_lottery(cards: u64, n: usize, draws: &[u64]) -> Vec<u64> {
    let base = cards / n as u64;
    let extra = (cards % n as u64) as usize;
    let mut players: Vec<usize> = (0..n).collect();
    for (t, &v) in draws.iter().enumerate().take(extra) {
        players.swap(t, t + v as usize);
    }
    let mut q = vec![base; n];
    for &p in &players[..extra] {
        q[p] += 1;
    }
    q
}

/// Replays a list of shuffle results: position `p` (1-based) swaps with `p + v`.
pub fn apply_swaps(m: u64, results: &[u64]) -> Vec<u64> {
    let mut deck: Vec<u64> = (1..=m).collect();
    for (i, &v) in results.iter().enumerate() {
        deck.swap(i, i + v as usize);
    }
    deck
}

/// Average of the minimum of `k` independent uniform counters in `1..=n`:
/// `sum_{j=1..n} j^k / n^k`.
pub fn expected_circles(n: u64, k: u32) -> BigRational {
    let num: BigInt = (1..=n).map(|j| Pow::pow(BigInt::from(j), k)).sum();
    BigRational::new(num, Pow::pow(BigInt::from(n), k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RoundKind {
    Lottery,
    Swap,
}

#[derive(Debug, Clone, Copy)]
struct Round {
    kind: RoundKind,
    modulus: u64,
    receiver: usize,
    contributors: [usize; 2],
}

/// Everything every party knows in advance.
#[derive(Debug)]
struct Plan {
    n: usize,
    order: Vec<usize>,
    roster: Vec<Capability>,
    cards: u64,
    bound: u64,
    fixed_quotas: Option<Vec<u64>>,
    rounds: Vec<Round>,
    distribute: bool,
    shuffle: bool,
    dealer: Option<usize>,
    feeders: Vec<Vec<usize>>,
}

impl Plan {
    fn pos(&self, p: usize) -> usize {
        self.order.iter().position(|&v| v == p).expect("party on the ring")
    }

    fn next(&self, p: usize) -> usize {
        self.order[(self.pos(p) + 1) % self.n]
    }

    fn batch_len(&self) -> usize {
        2 * self.cards as usize + 3
    }
}

/// Receiver/contributor triples `(P(i+1); P(i), P(i+2))` along the ring whose
/// contributors can draw. Falls back to any party with two drawing neighbours.
fn random_triples(graph: &ChannelGraph, order: &[usize], roster: &[Capability]) -> Result<Vec<(usize, [usize; 2])>> {
    let n = order.len();
    let full = |p: usize| roster[p] == Capability::Full;
    let t: Vec<_> = (0..n)
        .map(|i| (order[(i + 1) % n], [order[i], order[(i + 2) % n]]))
        .filter(|(_, [a, b])| full(*a) && full(*b) && a != b)
        .collect();
    if !t.is_empty() {
        return Ok(t);
    }
    for r in 0..n {
        let f: Vec<usize> = graph.secure_neighbours(r).into_iter().filter(|&p| full(p)).collect();
        if f.len() >= 2 {
            return Ok(vec![(r, [f[0], f[1]])]);
        }
    }
    Err(Error::input("no party has two randomness-capable neighbours"))
}

/// The ring `0 -> 1 -> .. -> n-1 -> 0` when those secure edges exist,
/// otherwise the graph's single secure cycle.
fn ring_order(graph: &ChannelGraph) -> Result<Vec<usize>> {
    let n = graph.k();
    if n < 3 {
        return Err(TopologyError::TooFewParties(n).into());
    }
    let natural = (0..n).all(|i| graph.security(i, (i + 1) % n) == Some(Security::Secure));
    if natural {
        return Ok((0..n).collect());
    }
    let all: Vec<usize> = (0..n).collect();
    Ok(graph.single_cycle(&all)?)
}

/// A full deal: optional lottery, optional shuffle, optional Protocol 1.
#[derive(Debug, Clone)]
pub struct Deal {
    graph: ChannelGraph,
    roster: Vec<Capability>,
    cards: u64,
    counter_bound: u64,
    quotas: Option<Vec<u64>>,
    shuffle: bool,
    distribute: bool,
    dealer: Option<usize>,
    ring: RingSpec,
}

impl Deal {
    /// Protocol 1 alone, quotas by lottery, no shuffle.
    pub fn new(graph: ChannelGraph, cards: u64, counter_bound: u64) -> Self {
        let k = graph.k();
        Deal {
            roster: vec![Capability::Full; k],
            graph,
            cards,
            counter_bound,
            quotas: None,
            shuffle: false,
            distribute: true,
            dealer: None,
            ring: RingSpec::modular(cards.max(2)).expect("modulus at least 2"),
        }
    }

    pub fn with_roster(mut self, roster: Vec<Capability>) -> Self {
        self.roster = roster;
        self
    }

    pub fn with_quotas(mut self, quotas: Vec<u64>) -> Self {
        self.quotas = Some(quotas);
        self
    }

    pub fn with_shuffle(mut self, shuffle: bool) -> Self {
        self.shuffle = shuffle;
        self
    }

    pub fn with_distribute(mut self, distribute: bool) -> Self {
        self.distribute = distribute;
        self
    }

    pub fn with_dealer(mut self, dealer: Option<usize>) -> Self {
        self.dealer = dealer;
        self
    }

    fn plan(&self) -> Result<Plan> {
        let n = self.graph.k();
        let order = ring_order(&self.graph)?;
        if self.cards == 0 {
            return Err(Error::input("need at least one card"));
        }
        if self.counter_bound == 0 {
            return Err(Error::input("counter bound must be at least 1"));
        }
        if self.roster.len() != n {
            return Err(TopologyError::PartyCount {
                graph: n,
                expected: self.roster.len(),
            }
            .into());
        }
        if let Some(q) = &self.quotas {
            if q.len() != n || q.iter().sum::<u64>() != self.cards {
                return Err(Error::input(format!("quotas {q:?} must give {n} parties {} cards", self.cards)));
            }
        }
        let triples = random_triples(&self.graph, &order, &self.roster)?;
        let mut rounds = Vec::new();
        let extra = if self.quotas.is_none() && self.distribute {
            (self.cards % n as u64) as usize
        } else {
            0
        };
        for t in 0..extra {
            rounds.push((RoundKind::Lottery, (n - t) as u64));
        }
        if self.shuffle {
            for p in 1..self.cards {
                rounds.push((RoundKind::Swap, self.cards - p + 1));
            }
        }
        let rounds = rounds
            .into_iter()
            .enumerate()
            .map(|(t, (kind, modulus))| {
                let (receiver, contributors) = triples[t % triples.len()];
                Round {
                    kind,
                    modulus,
                    receiver,
                    contributors,
                }
            })
            .collect();
        let mut feeders = vec![Vec::new(); n];
        for d in (0..n).filter(|&d| self.roster[d] == Capability::Dummy) {
            let f: Vec<usize> = self
                .graph
                .secure_neighbours(d)
                .into_iter()
                .filter(|&p| self.roster[p] == Capability::Full)
                .take(2)
                .collect();
            if f.len() < 2 && self.distribute {
                return Err(Error::input(format!("dummy P{d} needs two randomness-capable neighbours")));
            }
            feeders[d] = f;
        }
        if let Some(d) = self.dealer {
            if self.roster.get(d) != Some(&Capability::Dummy) {
                return Err(Error::input(format!("dealer P{d} must be a dummy")));
            }
            for o in (0..n).filter(|&o| o != d && self.roster[o] == Capability::Dummy) {
                if self.graph.security(o, d).is_none() {
                    return Err(TopologyError::MissingChannel(o, d).into());
                }
            }
        }
        Ok(Plan {
            n,
            order,
            roster: self.roster.clone(),
            cards: self.cards,
            bound: self.counter_bound,
            fixed_quotas: self.quotas.clone(),
            rounds,
            distribute: self.distribute,
            shuffle: self.shuffle,
            dealer: self.dealer,
            feeders,
        })
    }
}

pub struct DealParty {
    plan: Rc<Plan>,
    me: usize,
    round: usize,
    inbox: Vec<u64>,
    lottery: Vec<u64>,
    swaps: usize,
    deck: Vec<u64>,
    quotas: Vec<u64>,
    in_p1: bool,
    counter: Option<u64>,
    batches: BTreeMap<usize, Vec<u64>>,
    batch_pos: usize,
    seen: HashMap<u64, u64>,
    hand: Vec<u64>,
    kept_zero: bool,
    creates_last: bool,
    pending: VecDeque<u64>,
    finished: bool,
    collected: Vec<u64>,
    collected_from: usize,
}

impl DealParty {
    fn full(&self) -> bool {
        self.plan.roster[self.me] == Capability::Full
    }

    fn contribute(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let Some(r) = self.plan.rounds.get(self.round).copied() else {
            return Ok(());
        };
        if r.contributors.contains(&self.me) {
            let v = ctx.draw_index(r.modulus)?;
            ctx.send(PartyId(r.receiver), "contribution", Payload::Integer(v))?;
        }
        self.try_resolve(ctx)
    }

    fn try_resolve(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let Some(r) = self.plan.rounds.get(self.round).copied() else {
            return Ok(());
        };
        if r.receiver != self.me || self.inbox.len() < 2 {
            return Ok(());
        }
        let v = (self.inbox[0] + self.inbox[1]) % r.modulus;
        self.inbox.clear();
        let label = match r.kind {
            RoundKind::Lottery => LOTTERY,
            RoundKind::Swap => SWAP,
        };
        ctx.broadcast(label, Payload::Integer(v))?;
        self.apply(v, ctx)
    }

    fn apply(&mut self, v: u64, ctx: &mut Ctx<'_>) -> Result<()> {
        let r = self.plan.rounds[self.round];
        if v >= r.modulus {
            return Err(Error::cheat(ctx.me(), format!("published value {v} outside 0..{}", r.modulus)));
        }
        match r.kind {
            RoundKind::Lottery => self.lottery.push(v),
            RoundKind::Swap => {
                self.deck.swap(self.swaps, self.swaps + v as usize);
                self.swaps += 1;
            }
        }
        self.round += 1;
        if self.round < self.plan.rounds.len() {
            self.contribute(ctx)
        } else {
            self.enter_distribution(ctx)
        }
    }

    fn enter_distribution(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let plan = Rc::clone(&self.plan);
        self.quotas = match &plan.fixed_quotas {
            Some(q) => q.clone(),
            None => quotas_from_lottery(plan.cards, plan.n, &self.lottery),
        };
        self.in_p1 = true;
        if !plan.distribute {
            self.finished = true;
            return Ok(());
        }
        if self.full() {
            for d in (0..plan.n).filter(|&d| plan.feeders[d].contains(&self.me)) {
                let batch = (0..plan.batch_len())
                    .map(|_| ctx.draw_range(1, plan.bound))
                    .collect::<Result<Vec<u64>>>()?;
                ctx.send(PartyId(d), "counters", Payload::Integers(batch))?;
            }
        }
        if self.full() || self.batches.len() == 2 {
            self.reset_counter(ctx)?;
        }
        if plan.order[0] == self.me {
            ctx.send(PartyId(plan.next(self.me)), TOKEN, Payload::Integer(0))?;
            if plan.cards == 1 {
                self.creates_last = false;
            }
        }
        self.drain(ctx)
    }

    fn reset_counter(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let n = self.plan.bound;
        let c = if self.full() {
            ctx.draw_range(1, n)?
        } else {
            let f = &self.plan.feeders[self.me];
            let i = self.batch_pos;
            let (a, b) = match (self.batches[&f[0]].get(i), self.batches[&f[1]].get(i)) {
                (Some(a), Some(b)) => (*a, *b),
                _ => return Err(Error::protocol(format!("dummy P{} ran out of counter contributions", self.me))),
            };
            self.batch_pos += 1;
            dummy_counter(a, b, n)
        };
        ctx.record("counter", Payload::Integer(c));
        self.counter = Some(c);
        Ok(())
    }

    fn ready(&self) -> bool {
        self.in_p1 && self.counter.is_some()
    }

    fn drain(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        while self.ready() {
            let Some(m) = self.pending.pop_front() else { break };
            self.process(m, ctx)?;
        }
        Ok(())
    }

    fn process(&mut self, m: u64, ctx: &mut Ctx<'_>) -> Result<()> {
        let plan = Rc::clone(&self.plan);
        let r = plan.cards;
        if m > r {
            return Err(Error::protocol(format!("integer {m} beyond {r}")));
        }
        let s = {
            let e = self.seen.entry(m).or_insert(0);
            *e += 1;
            *e
        };
        let eligible = if m == 0 {
            !self.kept_zero
        } else {
            (self.hand.len() as u64) < self.quotas[self.me]
        };
        let keep = eligible && s > self.counter.expect("counter drawn");
        let next = PartyId(plan.next(self.me));
        if keep {
            if m == 0 {
                self.kept_zero = true;
            } else {
                self.hand.push(m);
            }
            ctx.record("kept", Payload::Integer(m));
            self.reset_counter(ctx)?;
            if m < r {
                self.creates_last = m + 1 == r;
                return ctx.send(next, TOKEN, Payload::Integer(m + 1));
            }
        } else if s == 1 {
            self.reset_counter(ctx)?;
        }
        if m == r && s == plan.bound + 1 {
            self.finished = true;
            if !self.creates_last {
                ctx.send(next, TOKEN, Payload::Integer(m))?;
            }
            return self.consolidate(ctx);
        }
        ctx.send(next, TOKEN, Payload::Integer(m))
    }

    fn consolidate(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        match self.plan.dealer {
            Some(d) if d != self.me && !self.full() => {
                ctx.send(PartyId(d), "cards", Payload::Integers(self.hand.clone()))
            }
            _ => Ok(()),
        }
    }
}

/// `(a + b) mod n`, with residue 0 read as `n` so the counter stays in `1..=n`.
pub fn dummy_counter(a: u64, b: u64, n: u64) -> u64 {
    match (a + b) % n {
        0 => n,
        c => c,
    }
}

impl Party for DealParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if self.plan.rounds.is_empty() {
            self.enter_distribution(ctx)
        } else {
            self.contribute(ctx)
        }
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        match msg.label.as_str() {
            "contribution" => {
                self.inbox.push(msg.payload.as_integer()?);
                self.try_resolve(ctx)
            }
            LOTTERY | SWAP => self.apply(msg.payload.as_integer()?, ctx),
            "counters" => {
                self.batches.insert(msg.from.0, msg.payload.as_integers()?.to_vec());
                if self.in_p1 && self.counter.is_none() && self.batches.len() == 2 {
                    self.reset_counter(ctx)?;
                }
                self.drain(ctx)
            }
            TOKEN => {
                self.pending.push_back(msg.payload.as_integer()?);
                self.drain(ctx)
            }
            "cards" => {
                self.collected.extend_from_slice(msg.payload.as_integers()?);
                self.collected_from += 1;
                Ok(())
            }
            other => Err(Error::protocol(format!("unexpected message {other}"))),
        }
    }
}

impl Protocol for Deal {
    type Party = DealParty;
    type Outcome = DealResult;

    fn name(&self) -> &'static str {
        "deal"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        self.roster.clone()
    }

    fn check_topology(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    fn parties(&self) -> Result<Vec<DealParty>> {
        let plan = Rc::new(self.plan()?);
        Ok((0..plan.n)
            .map(|me| DealParty {
                plan: Rc::clone(&plan),
                me,
                round: 0,
                inbox: Vec::new(),
                lottery: Vec::new(),
                swaps: 0,
                deck: (1..=plan.cards).collect(),
                quotas: Vec::new(),
                in_p1: false,
                counter: None,
                batches: BTreeMap::new(),
                batch_pos: 0,
                seen: HashMap::new(),
                hand: Vec::new(),
                kept_zero: false,
                creates_last: false,
                pending: VecDeque::new(),
                finished: false,
                collected: Vec::new(),
                collected_from: 0,
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<DealParty>, _: &Transcript) -> Result<DealResult> {
        let plan = Rc::clone(&parties[0].plan);
        let quotas = parties[0].quotas.clone();
        let deck = parties[0].deck.clone();
        for p in &parties {
            if !p.finished {
                return Err(Error::protocol(format!("P{} did not finish", p.me)));
            }
            if p.deck != deck || p.quotas != quotas {
                return Err(Error::protocol("parties disagree on public randomness"));
            }
        }
        let mut hands: Vec<Vec<u64>> = parties
            .iter()
            .map(|p| {
                let mut h = p.hand.clone();
                h.sort_unstable();
                h
            })
            .collect();
        let zero_keeper = parties.iter().find(|p| p.kept_zero).map(|p| PartyId(p.me));
        if plan.distribute {
            let mut all: Vec<u64> = hands.concat();
            all.sort_unstable();
            if all != (1..=plan.cards).collect::<Vec<_>>() {
                return Err(Error::protocol("hands do not partition the cards"));
            }
            for (i, h) in hands.iter().enumerate() {
                if h.len() as u64 != quotas[i] {
                    return Err(Error::protocol(format!("P{i} holds {} cards, quota {}", h.len(), quotas[i])));
                }
            }
        } else {
            hands = vec![Vec::new(); plan.n];
        }
        let permutation = plan.shuffle.then_some(deck);
        let mut result = DealResult {
            quotas,
            hands,
            zero_keeper,
            permutation,
            residual: None,
        };
        if let Some(d) = plan.dealer {
            let dealer = &parties[d];
            let dummies = plan.roster.iter().filter(|c| **c == Capability::Dummy).count();
            if dealer.collected_from + 1 != dummies {
                return Err(Error::protocol("dummy cards were not all consolidated"));
            }
            let mut res: Vec<u64> = dealer
                .hand
                .iter()
                .chain(&dealer.collected)
                .map(|&i| result.label(i))
                .collect();
            res.sort_unstable();
            result.residual = Some(res);
        }
        Ok(result)
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Deal {
            cards: self.cards,
            counter_bound: self.counter_bound,
            quotas: self.quotas.clone(),
            shuffle: self.shuffle,
            distribute: self.distribute,
            dealer: self.dealer,
        }
        .to_value()
    }
}

/// Protocol 1 on `graph` with `cards` integers and counter bound `n`.
pub fn protocol1_distribute(graph: &ChannelGraph, cards: u64, n: u64, env: RunEnv<'_>) -> Result<Run<DealResult>> {
    engine::run(&Deal::new(graph.clone(), cards, n), env)
}

/// Protocol 1 followed by a collective Knuth shuffle assigning labels to indices.
pub fn deal_deck(graph: &ChannelGraph, cards: u64, n: u64, env: RunEnv<'_>) -> Result<Run<DealResult>> {
    engine::run(&Deal::new(graph.clone(), cards, n).with_shuffle(true), env)
}

/// A uniformly random permutation of `1..=m` from `m - 1` collective draws.
pub fn knuth_shuffle(graph: &ChannelGraph, m: u64, env: RunEnv<'_>) -> Result<Run<Vec<u64>>> {
    let deal = Deal::new(graph.clone(), m, 1).with_shuffle(true).with_distribute(false);
    let run = engine::run(&deal, env)?;
    Ok(Run {
        outcome: run.outcome.permutation.clone().unwrap_or_default(),
        transcript: run.transcript,
    })
}

/// The published shuffle results of a transcript, in order.
pub fn recorded_swaps(t: &Transcript) -> Vec<u64> {
    t.with_label(SWAP).filter_map(|m| m.payload.as_integer().ok()).collect()
}

/// Quotas as any observer can compute them from a deal transcript.
pub fn public_quotas(t: &Transcript) -> Result<Vec<u64>> {
    let cfg: ProtocolConfig = serde_json::from_value(t.meta.config.clone())
        .map_err(|e| Error::input(format!("not a deal transcript: {e}")))?;
    match cfg {
        ProtocolConfig::Deal { quotas: Some(q), .. } => Ok(q),
        ProtocolConfig::Deal { cards, .. } => {
            let draws: Vec<u64> = t.with_label(LOTTERY).filter_map(|m| m.payload.as_integer().ok()).collect();
            Ok(quotas_from_lottery(cards, t.k(), &draws))
        }
        _ => Err(Error::input(format!("not a deal transcript: {}", t.meta.protocol))),
    }
}

/// Three-way deal with `P2` a dummy whose counters are `c_31 + c_32 mod N`
/// from `P0` and `P1`. The dummy's hand (`hands[2]`) goes back in the deck.
pub fn dummy_deal_two_players(cards: u64, n: u64, env: RunEnv<'_>) -> Result<Run<DealResult>> {
    let deal = Deal::new(ChannelGraph::cycle(3)?, cards, n)
        .with_roster(vec![Capability::Full, Capability::Full, Capability::Dummy])
        .with_shuffle(true);
    engine::run(&deal, env)
}

/// `round(m / s) - k`, at least 1.
pub fn dummy_count(m: u64, k: u64, s: u64) -> u64 {
    let d = (m + s / 2) / s;
    d.saturating_sub(k).max(1)
}

/// Cycle of `k` real players followed by `d` dummies. Each dummy is also
/// linked to `P0` and `P1` (counter contributions), and the first dummy, the
/// dealer, to every other party.
pub fn dummy_dealer_graph(k: usize, d: usize) -> Result<ChannelGraph> {
    let n = k + d;
    let mut g = ChannelGraph::cycle(n)?;
    let dealer = k;
    for p in (0..n).filter(|&p| p != dealer) {
        g.ensure_edge(p, dealer, Security::Secure)?;
    }
    for x in k..n {
        for r in [0, 1] {
            g.ensure_edge(r, x, Security::Secure)?;
        }
    }
    Ok(g)
}

/// The residual deck after a dummy-dealer deal and the means to draw from it.
#[derive(Debug, Clone)]
pub struct DealerSession {
    pub graph: ChannelGraph,
    pub roster: Vec<Capability>,
    pub dealer: usize,
    pub residual: Vec<u64>,
    seed: u64,
    requests: u64,
}

impl DealerSession {
    /// Serves `count` uniformly random residual cards to `player`.
    pub fn draw(&mut self, player: usize, count: usize) -> Result<Run<Vec<u64>>> {
        self.requests += 1;
        let p = DealerDraw {
            graph: self.graph.clone(),
            roster: self.roster.clone(),
            dealer: self.dealer,
            player,
            deck: self.residual.clone(),
            count,
            ring: RingSpec::modular(2).expect("Z_2"),
        };
        let run = engine::run(&p, RunEnv::seeded(self.seed.wrapping_add(self.requests)))?;
        for c in &run.outcome {
            let i = self.residual.iter().position(|x| x == c).expect("served card was in the deck");
            self.residual.remove(i);
        }
        Ok(run)
    }
}

/// Graph, roster and quotas for `k` real players holding exactly `s` cards
/// each out of `m`, with `dummies` (default [`dummy_count`]) dummies taking
/// the rest. The first dummy, `P_k`, is the dealer.
pub fn fixed_hands_layout(
    m: u64,
    k: usize,
    s: u64,
    dummies: Option<usize>,
) -> Result<(ChannelGraph, Vec<Capability>, Vec<u64>)> {
    if k < 2 || s == 0 {
        return Err(Error::input("need at least 2 players and 1 card each"));
    }
    if m < k as u64 * s {
        return Err(Error::input(format!("{m} cards cannot give {k} players {s} each")));
    }
    let d = dummies.unwrap_or(dummy_count(m, k as u64, s) as usize);
    if d == 0 {
        return Err(Error::input("need at least one dummy to act as dealer"));
    }
    let graph = dummy_dealer_graph(k, d)?;
    let mut roster = vec![Capability::Full; k];
    roster.extend(std::iter::repeat_n(Capability::Dummy, d));
    let rest = m - k as u64 * s;
    let mut quotas = vec![s; k];
    quotas.extend((0..d as u64).map(|i| rest / d as u64 + u64::from(i < rest % d as u64)));
    Ok((graph, roster, quotas))
}

/// `k` real players get exactly `s` cards each; `dummy_count` dummies absorb
/// the rest, which ends up with the dealer.
pub fn dummy_dealer_fixed_hands(m: u64, k: usize, s: u64, n: u64, seed: u64) -> Result<(Run<DealResult>, DealerSession)> {
    let (graph, roster, quotas) = fixed_hands_layout(m, k, s, None)?;
    let deal = Deal::new(graph.clone(), m, n)
        .with_roster(roster.clone())
        .with_quotas(quotas)
        .with_shuffle(true)
        .with_dealer(Some(k));
    let run = engine::run(&deal, RunEnv::seeded(seed))?;
    let session = DealerSession {
        graph,
        roster,
        dealer: k,
        residual: run.outcome.residual.clone().unwrap_or_default(),
        seed,
        requests: 0,
    };
    Ok((run, session))
}

/// One draw request to the dummy dealer. Two real neighbours of the dealer
/// each send a batch of contributions; the dealer picks card `t` at index
/// `(a_t + b_t) mod (remaining)` and sends the picks to the player.
#[derive(Debug, Clone)]
pub struct DealerDraw {
    pub graph: ChannelGraph,
    pub roster: Vec<Capability>,
    pub dealer: usize,
    pub player: usize,
    pub deck: Vec<u64>,
    pub count: usize,
    ring: RingSpec,
}

impl DealerDraw {
    fn contributors(&self) -> Result<[usize; 2]> {
        let mut f: Vec<usize> = self
            .graph
            .secure_neighbours(self.dealer)
            .into_iter()
            .filter(|&p| self.roster[p] == Capability::Full)
            .collect();
        f.sort_by_key(|&p| p == self.player);
        match f[..] {
            [a, b, ..] => Ok([a, b]),
            _ => Err(Error::input("dealer needs two randomness-capable neighbours")),
        }
    }
}

#[derive(Default)]
pub struct DrawParty {
    /// Dealer index and the moduli of this contributor's draws.
    contribute: Option<(usize, Vec<u64>)>,
    /// Dealer state: remaining deck, requesting player, batches received.
    serve: Option<(Vec<u64>, usize, Vec<Vec<u64>>)>,
}

impl Party for DrawParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        if let Some((dealer, sizes)) = &self.contribute {
            let batch = sizes.iter().map(|&s| ctx.draw_index(s)).collect::<Result<Vec<u64>>>()?;
            ctx.send(PartyId(*dealer), "contribution", Payload::Integers(batch))?;
        }
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        match (msg.label.as_str(), &mut self.serve) {
            ("contribution", Some((deck, player, batches))) => {
                batches.push(msg.payload.as_integers()?.to_vec());
                if batches.len() == 2 {
                    let mut drawn = Vec::new();
                    for (a, b) in batches[0].iter().zip(&batches[1]) {
                        let i = ((a + b) % deck.len() as u64) as usize;
                        drawn.push(deck.remove(i));
                    }
                    ctx.send(PartyId(*player), "cards", Payload::Integers(drawn))?;
                }
                Ok(())
            }
            ("cards", None) => {
                ctx.record("cards", msg.payload.clone());
                Ok(())
            }
            (other, _) => Err(Error::protocol(format!("unexpected message {other}"))),
        }
    }
}

impl Protocol for DealerDraw {
    type Party = DrawParty;
    type Outcome = Vec<u64>;

    fn name(&self) -> &'static str {
        "dealer_draw"
    }

    fn ring(&self) -> &RingSpec {
        &self.ring
    }

    fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    fn roster(&self) -> Vec<Capability> {
        self.roster.clone()
    }

    fn check_topology(&self) -> Result<()> {
        self.contributors()?;
        if self.graph.security(self.player, self.dealer).is_none() {
            return Err(TopologyError::MissingChannel(self.player, self.dealer)
            .into());
        }
        Ok(())
    }

    fn parties(&self) -> Result<Vec<DrawParty>> {
        if self.count > self.deck.len() {
            return Err(Error::input(format!("only {} cards left", self.deck.len())));
        }
        let [a, b] = self.contributors()?;
        let sizes: Vec<u64> = (0..self.count).map(|t| (self.deck.len() - t) as u64).collect();
        Ok((0..self.graph.k())
            .map(|p| DrawParty {
                contribute: (p == a || p == b).then(|| (self.dealer, sizes.clone())),
                serve: (p == self.dealer).then(|| (self.deck.clone(), self.player, Vec::new())),
            })
            .collect())
    }

    fn outcome(&self, parties: Vec<DrawParty>, t: &Transcript) -> Result<Vec<u64>> {
        let _ = parties;
        t.with_label("cards")
            .find(|m| m.from == PartyId(self.dealer))
            .map(|m| m.payload.as_integers().map(<[u64]>::to_vec))
            .transpose()?
            .ok_or_else(|| Error::protocol("dealer served nothing"))
    }
}

/// Protocol 2 with explicit roles: both contributors send a uniform value in
/// `0..modulus` to the receiver, who adds them. `fixed` makes the first
/// contributor send a chosen value instead of a random one.
#[derive(Debug, Clone)]
pub struct CollectiveRandom {
    pub graph: ChannelGraph,
    pub modulus: u64,
    pub receiver: usize,
    pub contributors: [usize; 2],
    pub fixed: Option<u64>,
    ring: RingSpec,
}

impl CollectiveRandom {
    pub fn new(graph: ChannelGraph, modulus: u64, receiver: usize, contributors: [usize; 2]) -> Self {
        CollectiveRandom {
            graph,
            modulus,
            receiver,
            contributors,
            fixed: None,
            ring: RingSpec::modular(modulus.max(2)).expect("modulus at least 2"),
        }
    }

    pub fn with_fixed(mut self, v: u64) -> Self {
        self.fixed = Some(v);
        self
    }
}

pub struct RandomParty {
    role: Option<usize>,
    receiver: usize,
    modulus: u64,
    fixed: Option<u64>,
    got: Vec<u64>,
    result: Option<u64>,
}

impl Party for RandomParty {
    fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
        let v = match (self.role, self.fixed) {
            (Some(0), Some(f)) => f % self.modulus,
            (Some(_), _) => ctx.draw_index(self.modulus)?,
            (None, _) => return Ok(()),
        };
        ctx.send(PartyId(self.receiver), "contribution", Payload::Integer(v))
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
        self.got.push(msg.payload.as_integer()?);
        if self.got.len() == 2 {
            let v = (self.got[0] + self.got[1]) % self.modulus;
            ctx.record("result", Payload::Integer(v));
            self.result = Some(v);
        }
        Ok(())
    }
}

impl Protocol for CollectiveRandom {
    type Party = RandomParty;
    type Outcome = u64;

    fn name(&self) -> &'static str {
        "random"
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
        let [a, b] = self.contributors;
        let r = self.receiver;
        if a == b || a == r || b == r {
            return Err(Error::input("receiver and contributors must be distinct"));
        }
        self.graph
            .require_channels(&[(a, r, Security::Secure), (b, r, Security::Secure)])?;
        Ok(())
    }

    fn parties(&self) -> Result<Vec<RandomParty>> {
        if self.modulus == 0 {
            return Err(Error::input("modulus must be at least 1"));
        }
        Ok((0..self.graph.k())
            .map(|p| RandomParty {
                role: self.contributors.iter().position(|&c| c == p),
                receiver: self.receiver,
                modulus: self.modulus,
                fixed: self.fixed,
                got: Vec::new(),
                result: None,
            })
            .collect())
    }

    fn outcome(&self, mut parties: Vec<RandomParty>, _: &Transcript) -> Result<u64> {
        parties
            .swap_remove(self.receiver)
            .result
            .ok_or_else(|| Error::protocol("receiver got no contributions"))
    }

    fn config(&self) -> serde_json::Value {
        ProtocolConfig::Random {
            modulus: self.modulus,
            receiver: self.receiver,
            contributors: self.contributors,
            fixed: self.fixed,
        }
        .to_value()
    }
}

/// Protocol 2 on a triangle with the given (receiver, contributor, contributor).
pub fn protocol2_random3(modulus: u64, roles: (usize, usize, usize), env: RunEnv<'_>) -> Result<Run<u64>> {
    let p = CollectiveRandom::new(ChannelGraph::cycle(3)?, modulus, roles.0, [roles.1, roles.2]);
    engine::run(&p, env)
}

/// Protocol 2 on a k-cycle with 1-based round index `i`: receiver `P_(i+1)`,
/// contributors `P_i` and `P_(i+2)`, indices mod `k` (all 1-based).
pub fn protocol2_roles(i: usize, k: usize) -> (usize, usize, usize) {
    let z = |one_based: usize| (one_based + k - 1) % k;
    (z(i + 1), z(i), z(i + 2))
}

pub fn protocol2_random_k(modulus: u64, i: usize, graph: &ChannelGraph, env: RunEnv<'_>) -> Result<Run<u64>> {
    let (r, a, b) = protocol2_roles(i, graph.k());
    engine::run(&CollectiveRandom::new(graph.clone(), modulus, r, [a, b]), env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::ScriptedTapes;

    fn tri() -> ChannelGraph {
        ChannelGraph::cycle(3).unwrap()
    }

    #[test]
    fn partitions_with_quotas() {
        for seed in 0..30 {
            let r = protocol1_distribute(&tri(), 6, 2, RunEnv::seeded(seed)).unwrap().outcome;
            assert_eq!(r.hand_sizes(), vec![2, 2, 2]);
            assert!(r.zero_keeper.is_some());
        }
        let r = protocol1_distribute(&ChannelGraph::cycle(4).unwrap(), 7, 3, RunEnv::seeded(1)).unwrap().outcome;
        let mut sizes = r.hand_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 2, 2]);
    }

    #[test]
    fn fifty_two_cards() {
        let r = deal_deck(&tri(), 52, 10, RunEnv::seeded(5)).unwrap().outcome;
        let mut sizes = r.hand_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![17, 17, 18]);
        let mut labels: Vec<u64> = r.labelled_hands().concat();
        labels.sort_unstable();
        assert_eq!(labels, (1..=52).collect::<Vec<_>>());
        let r = deal_deck(&tri(), 3, 10, RunEnv::seeded(5)).unwrap().outcome;
        assert_eq!(r.hand_sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn halting_follows_the_last_integer() {
        let n = 3;
        let run = protocol1_distribute(&tri(), 4, n, RunEnv::seeded(9)).unwrap();
        let last: Vec<&Message> = run
            .transcript
            .with_label(TOKEN)
            .filter(|m| m.payload == Payload::Integer(4))
            .collect();
        // created once, then N + 1 full circles less the withheld hop
        assert_eq!(last.len() as u64, 3 * (n + 1));
        assert_eq!(last.last().unwrap().seq as usize, run.transcript.messages.len() - 1);
    }

    #[test]
    fn single_card_hand_count() {
        let t = protocol1_distribute(&tri(), 1, 1, RunEnv::seeded(0)).unwrap().transcript;
        assert_eq!(t.with_label(TOKEN).count(), 10);
    }

    #[test]
    fn shuffle_replays_from_swaps() {
        let run = knuth_shuffle(&tri(), 8, RunEnv::seeded(2)).unwrap();
        let swaps = recorded_swaps(&run.transcript);
        assert_eq!(swaps.len(), 7);
        assert_eq!(apply_swaps(8, &swaps), run.outcome);
        assert_eq!(knuth_shuffle(&tri(), 1, RunEnv::seeded(2)).unwrap().outcome, vec![1]);
    }

    #[test]
    fn protocol2_examples() {
        let tapes = ScriptedTapes::new().with_u64(1, [3]).with_u64(2, [4]);
        assert_eq!(protocol2_random3(5, (0, 1, 2), RunEnv::with_tapes(tapes)).unwrap().outcome, 2);
        for s in 0..5 {
            assert_eq!(protocol2_random3(1, (0, 1, 2), RunEnv::seeded(s)).unwrap().outcome, 0);
        }
        assert_eq!(protocol2_roles(1, 3), (1, 0, 2));
        assert_eq!(protocol2_roles(5, 5), (0, 4, 1));
    }

    #[test]
    fn lottery_quotas() {
        assert_eq!(quotas_from_lottery(6, 3, &[]), vec![2, 2, 2]);
        assert_eq!(quotas_from_lottery(52, 3, &[2]), vec![17, 17, 18]);
        assert_eq!(quotas_from_lottery(5, 3, &[1, 1]), vec![1, 2, 2]);
    }

    #[test]
    fn expected_circles_values() {
        assert_eq!(expected_circles(1, 5), BigRational::from_integer(1.into()));
        assert_eq!(expected_circles(2, 2), BigRational::new(5.into(), 4.into()));
        assert_eq!(expected_circles(10, 3), BigRational::new(3025.into(), 1000.into()));
    }

    #[test]
    fn dummy_two_player_deal() {
        assert_eq!(dummy_counter(2, 3, 4), 1);
        assert_eq!(dummy_counter(2, 2, 4), 4);
        let run = dummy_deal_two_players(6, 4, RunEnv::seeded(3)).unwrap();
        assert_eq!(run.transcript.draws[2], 0);
        assert_eq!(run.outcome.hand_sizes(), vec![2, 2, 2]);
        let batches: Vec<&Message> = run.transcript.with_label("counters").collect();
        assert_eq!(batches.len(), 2);
        let a = batches[0].payload.as_integers().unwrap();
        let b = batches[1].payload.as_integers().unwrap();
        let counters: Vec<u64> = run.transcript.locals(PartyId(2))
            .iter()
            .filter(|l| l.label == "counter")
            .map(|l| l.value.as_integer().unwrap())
            .collect();
        assert!(!counters.is_empty());
        for (i, c) in counters.iter().enumerate() {
            assert_eq!(*c, dummy_counter(a[i], b[i], 4));
        }
    }

    #[test]
    fn dummy_dealer() {
        assert_eq!(dummy_count(52, 2, 17), 1);
        assert_eq!(dummy_count(6, 2, 2), 1);
        let (run, mut session) = dummy_dealer_fixed_hands(52, 2, 17, 10, 4).unwrap();
        assert_eq!(&run.outcome.hand_sizes()[..2], &[17, 17]);
        assert_eq!(session.residual.len(), 18);
        assert_eq!(run.transcript.total_draws(Capability::Dummy), 0);
        let before = session.residual.clone();
        let got = session.draw(0, 1).unwrap();
        assert_eq!(got.outcome.len(), 1);
        assert!(before.contains(&got.outcome[0]));
        assert_eq!(session.residual.len(), 17);
        assert!(!session.residual.contains(&got.outcome[0]));

        let (run, session) = dummy_dealer_fixed_hands(6, 2, 2, 4, 1).unwrap();
        assert_eq!(run.outcome.hand_sizes(), vec![2, 2, 2]);
        assert_eq!(session.residual.len(), 2);
        let (run, session) = dummy_dealer_fixed_hands(20, 2, 3, 4, 1).unwrap();
        assert_eq!(&run.outcome.hand_sizes()[..2], &[3, 3]);
        assert_eq!(session.residual.len(), 14);
        assert!(dummy_dealer_fixed_hands(5, 2, 3, 4, 1).is_err());
    }

    #[test]
    fn dummy_dealer_many_dummies() {
        for seed in 0..20 {
            for (m, k, s) in [(52, 3, 5), (30, 2, 4), (12, 3, 1)] {
                let (run, session) = dummy_dealer_fixed_hands(m, k, s, 6, seed).unwrap();
                assert!(run.outcome.hand_sizes()[..k].iter().all(|&h| h as u64 == s));
                assert_eq!(session.residual.len() as u64, m - k as u64 * s);
            }
        }
    }
}
