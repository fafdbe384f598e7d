//! Exhaustive secrecy checks, coalition analysis and transmission metrics.
//!
//! A secrecy claim says an observer's view is independent of some protected
//! inputs, possibly given a function of them. [`secrecy_enumeration_check`]
//! runs every input assignment against every randomness path (an
//! [`Odometer`]), builds the exact distribution of the observer's view per
//! assignment, and compares distributions within each group of assignments
//! the claim says are indistinguishable.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, ProtocolConfig};
use crate::engine::{view_of, EntryKind, Observer, ObservedEntry, RunEnv, Transcript};
use crate::error::{Error, Result};
use crate::protocols::arith::UnaryFn;
use crate::protocols::poker::{self, TOKEN};
use crate::ring::{RingElement, RingSpec};
use crate::tape::Odometer;
use crate::topology::{ChannelGraph, PartyId, TopologySpec};

/// What the claim allows the observer to learn about the protected inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Given {
    Nothing,
    /// Sum of the listed inputs.
    Sum(Vec<usize>),
    /// `n_a - n_b`.
    Difference(usize, usize),
}

/// Which part of the view is examined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Full,
    /// Entries up to, not including, the first broadcast.
    BeforeFirstBroadcast,
}

fn default_budget() -> u64 {
    1_000_000
}

/// One secrecy claim and the finite domain it is checked over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecrecySpec {
    /// One of `sum`, `product`, `rating`, `example_f1`, `example_f2`,
    /// `commit3`, `commit2`, `millionaires`, `share`, `subroutine`.
    pub protocol: String,
    pub ring: RingSpec,
    /// Number of inputs.
    pub inputs: usize,
    #[serde(default)]
    pub topology: Option<TopologySpec>,
    pub observer: Observer,
    /// Indices of the inputs the view must not reveal.
    pub protected: Vec<usize>,
    #[serde(default = "nothing")]
    pub given: Given,
    #[serde(default)]
    pub scope: Scope,
    /// Restrict inputs to units (products).
    #[serde(default)]
    pub units_only: bool,
    /// Largest allowed `|n_0 - n_1|` over canonical representatives.
    #[serde(default)]
    pub max_gap: Option<u64>,
    /// Upper bound on the number of runs.
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn nothing() -> Given {
    Given::Nothing
}

impl SecrecySpec {
    pub fn new(protocol: &str, ring: RingSpec, inputs: usize, observer: Observer, protected: Vec<usize>) -> Self {
        SecrecySpec {
            protocol: protocol.into(),
            ring,
            inputs,
            topology: None,
            observer,
            protected,
            given: Given::Nothing,
            scope: Scope::Full,
            units_only: false,
            max_gap: None,
            budget: default_budget(),
        }
    }

    pub fn given(mut self, g: Given) -> Self {
        self.given = g;
        self
    }

    pub fn scope(mut self, s: Scope) -> Self {
        self.scope = s;
        self
    }

    pub fn units_only(mut self) -> Self {
        self.units_only = true;
        self
    }

    pub fn max_gap(mut self, gap: u64) -> Self {
        self.max_gap = Some(gap);
        self
    }

    pub fn budget(mut self, b: u64) -> Self {
        self.budget = b;
        self
    }

    fn config(&self, inputs: &[RingElement]) -> Result<ProtocolConfig> {
        let v = inputs.to_vec();
        Ok(match self.protocol.as_str() {
            "sum" => ProtocolConfig::Sum { inputs: v },
            "product" => ProtocolConfig::Product { inputs: v },
            "rating" => ProtocolConfig::Rating { inputs: v },
            "example_f1" => ProtocolConfig::ExampleF1 { inputs: v },
            "example_f2" => ProtocolConfig::ExampleF2 {
                inputs: v,
                g: UnaryFn::Identity,
            },
            "commit3" => ProtocolConfig::Commit3 {
                inputs: v,
                mode: Default::default(),
            },
            "commit2" => ProtocolConfig::Commit2 { inputs: v },
            "millionaires" => ProtocolConfig::Millionaires { inputs: v },
            "share" | "subroutine" if inputs.len() != 1 => {
                return Err(Error::input(format!("{} takes a single input", self.protocol)));
            }
            "share" => ProtocolConfig::Share { secret: v[0].clone() },
            "subroutine" => ProtocolConfig::Subroutine {
                m: v[0].clone(),
                initiator: 0,
            },
            other => return Err(Error::input(format!("no secrecy runner for protocol {other:?}"))),
        })
    }

    fn graph(&self, cfg: &ProtocolConfig) -> Result<ChannelGraph> {
        match &self.topology {
            Some(t) => Ok(t.build()?),
            None => cfg.default_graph(None),
        }
    }

    fn domain(&self) -> Result<Vec<Vec<RingElement>>> {
        let m = self
            .ring
            .modulus()
            .ok_or_else(|| Error::input("enumeration needs a finite ring"))?;
        let m: u64 = m.try_into().map_err(|_| Error::input("modulus too large to enumerate"))?;
        let values: Vec<RingElement> = if self.units_only {
            self.ring.units()
        } else {
            (0..m as i64).map(RingElement::from).collect()
        };
        let total = (values.len() as u128).checked_pow(self.inputs as u32).unwrap_or(u128::MAX);
        if total > self.budget as u128 {
            return Err(Error::input(format!("{total} input assignments exceed the budget {}", self.budget)));
        }
        let mut out = vec![Vec::new()];
        for _ in 0..self.inputs {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<RingElement>| {
                    values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        if let Some(gap) = self.max_gap {
            out.retain(|a| a.len() < 2 || (&a[0].0 - &a[1].0).magnitude() <= &gap.into());
        }
        Ok(out)
    }

    /// Everything the claim allows to differ: the unprotected inputs and the given value.
    fn group_key(&self, a: &[RingElement]) -> Vec<RingElement> {
        let mut key: Vec<RingElement> = (0..a.len())
            .filter(|i| !self.protected.contains(i))
            .map(|i| a[i].clone())
            .collect();
        match &self.given {
            Given::Nothing => {}
            Given::Sum(ix) => key.push(self.ring.sum(ix.iter().map(|&i| &a[i]))),
            Given::Difference(x, y) => key.push(self.ring.sub(&a[*x], &a[*y])),
        }
        key
    }
}

type Distribution = HashMap<Vec<ObservedEntry>, BigRational>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub first: Vec<RingElement>,
    pub second: Vec<RingElement>,
    /// A view whose probability differs between the two assignments.
    pub view: Vec<String>,
    pub p_first: String,
    pub p_second: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SecrecyVerdict {
    Pass { assignments: usize, runs: u64 },
    Counterexample(Counterexample),
    BudgetExceeded { budget: u64 },
}

impl SecrecyVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, SecrecyVerdict::Pass { .. })
    }
}

fn observed(spec: &SecrecySpec, t: &Transcript) -> Result<Vec<ObservedEntry>> {
    let view = view_of(t, &spec.observer)?;
    let mut obs = view.observed();
    if spec.scope == Scope::BeforeFirstBroadcast {
        if let Some(cut) = obs.iter().position(|e| e.0 == EntryKind::Broadcast) {
            obs.truncate(cut);
        }
    }
    Ok(obs)
}

fn distribution(spec: &SecrecySpec, inputs: &[RingElement], runs: &AtomicU64) -> Result<Option<Distribution>> {
    let cfg = spec.config(inputs)?;
    let graph = spec.graph(&cfg)?;
    let limit = spec.ring.modulus().and_then(|m| u64::try_from(m).ok()).unwrap_or(u64::MAX);
    let odo = Odometer::new(limit);
    let mut dist = Distribution::new();
    loop {
        if runs.fetch_add(1, Ordering::Relaxed) >= spec.budget {
            return Ok(None);
        }
        let report = config::execute(&cfg, Some(&spec.ring), graph.clone(), None, RunEnv::with_tapes(odo.clone()))?;
        let w = odo.weight();
        *dist.entry(observed(spec, &report.transcript)?).or_insert_with(BigRational::zero) += w;
        if !odo.advance() {
            return Ok(Some(dist));
        }
    }
}

fn render(view: &[ObservedEntry]) -> Vec<String> {
    view.iter()
        .map(|(kind, from, to, label, value)| format!("{kind:?} {from} -> {to} [{label}] {value}"))
        .collect()
}

fn compare(a: &Distribution, b: &Distribution) -> Option<(Vec<ObservedEntry>, BigRational, BigRational)> {
    let zero = BigRational::zero();
    for view in a.keys().chain(b.keys()) {
        let pa = a.get(view).unwrap_or(&zero);
        let pb = b.get(view).unwrap_or(&zero);
        if pa != pb {
            return Some((view.clone(), pa.clone(), pb.clone()));
        }
    }
    None
}

/// Enumerates all inputs and all randomness and checks the claim exactly.
pub fn secrecy_enumeration_check(spec: &SecrecySpec) -> Result<SecrecyVerdict> {
    for &i in &spec.protected {
        if i >= spec.inputs {
            return Err(Error::input(format!("protected input {i} out of range")));
        }
    }
    let domain = spec.domain()?;
    let runs = AtomicU64::new(0);
    let dists: Vec<Option<Distribution>> = domain
        .par_iter()
        .map(|a| distribution(spec, a, &runs))
        .collect::<Result<_>>()?;
    if dists.iter().any(Option::is_none) {
        return Ok(SecrecyVerdict::BudgetExceeded { budget: spec.budget });
    }
    let mut groups: BTreeMap<Vec<RingElement>, usize> = BTreeMap::new();
    for (i, a) in domain.iter().enumerate() {
        let key = spec.group_key(a);
        match groups.get(&key) {
            None => {
                groups.insert(key, i);
            }
            Some(&j) => {
                let (da, db) = (dists[j].as_ref().expect("complete"), dists[i].as_ref().expect("complete"));
                if let Some((view, pa, pb)) = compare(da, db) {
                    return Ok(SecrecyVerdict::Counterexample(Counterexample {
                        first: domain[j].clone(),
                        second: a.clone(),
                        view: render(&view),
                        p_first: pa.to_string(),
                        p_second: pb.to_string(),
                    }));
                }
            }
        }
    }
    Ok(SecrecyVerdict::Pass {
        assignments: domain.len(),
        runs: runs.load(Ordering::Relaxed),
    })
}

/// An input expression a coalition may learn.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learnable {
    Input(usize),
    /// Sum of the listed inputs.
    SumOf(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionReport {
    pub coalition: Vec<usize>,
    pub learnable: Vec<Learnable>,
}

fn proper_subset(k: usize, coalition: &[usize]) -> Result<Vec<usize>> {
    let mut c = coalition.to_vec();
    c.sort_unstable();
    c.dedup();
    if c.is_empty() || c.len() >= k || c.iter().any(|&p| p >= k) {
        return Err(Error::input(format!("coalition {coalition:?} must be a proper nonempty subset of 0..{k}")));
    }
    Ok(c)
}

/// Maximal runs of consecutive non-members around the cycle.
fn gaps(k: usize, c: &[usize]) -> Vec<Vec<usize>> {
    let start = (0..k).find(|p| c.contains(p)).expect("nonempty coalition");
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    for step in 1..=k {
        let p = (start + step) % k;
        if c.contains(&p) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(p);
        }
    }
    out
}

fn learnable_of(mut parts: Vec<usize>) -> Learnable {
    parts.sort_unstable();
    match parts[..] {
        [one] => Learnable::Input(one),
        _ => Learnable::SumOf(parts),
    }
}

/// What a coalition learns in the sum protocol on a `k`-cycle once the total
/// is public: its own inputs and the sum over every union of the gaps
/// between its members.
pub fn coalition_closure(k: usize, coalition: &[usize]) -> Result<CoalitionReport> {
    if k < 3 {
        return Err(Error::input("need at least 3 parties"));
    }
    let c = proper_subset(k, coalition)?;
    let g = gaps(k, &c);
    let mut learnable: Vec<Learnable> = c.iter().map(|&p| Learnable::Input(p)).collect();
    for mask in 1u32..1 << g.len() {
        let union: Vec<usize> = (0..g.len()).filter(|i| mask >> i & 1 == 1).flat_map(|i| g[i].clone()).collect();
        learnable.push(learnable_of(union));
    }
    learnable.sort();
    Ok(CoalitionReport { coalition: c, learnable })
}

/// [`coalition_closure`] by brute force: runs the sum protocol over `Z_2` on
/// every input and randomness path and keeps each candidate expression (an
/// input, or the sum of two or more non-members) that the coalition's joint
/// view always pins down.
pub fn coalition_closure_brute(k: usize, coalition: &[usize]) -> Result<CoalitionReport> {
    let c = proper_subset(k, coalition)?;
    let ring = RingSpec::modular(2).expect("Z_2");
    let spec = SecrecySpec::new(
        "sum",
        ring.clone(),
        k,
        Observer::Coalition(c.iter().map(|&p| PartyId(p)).collect()),
        Vec::new(),
    );
    let rest: Vec<usize> = (0..k).filter(|p| !c.contains(p)).collect();
    let mut candidates: Vec<Learnable> = (0..k).map(Learnable::Input).collect();
    for mask in 1u32..1 << rest.len() {
        if mask.count_ones() > 1 {
            candidates.push(learnable_of((0..rest.len()).filter(|i| mask >> i & 1 == 1).map(|i| rest[i]).collect()));
        }
    }
    let eval = |l: &Learnable, a: &[RingElement]| match l {
        Learnable::Input(i) => a[*i].clone(),
        Learnable::SumOf(ix) => ring.sum(ix.iter().map(|&i| &a[i])),
    };
    // view -> value of each candidate seen with it (None once two differ)
    let mut seen: HashMap<Vec<ObservedEntry>, Vec<Option<RingElement>>> = HashMap::new();
    let runs = AtomicU64::new(0);
    for a in spec.domain()? {
        let dist = distribution(&spec, &a, &runs)?.expect("small domain");
        for view in dist.into_keys() {
            let vals: Vec<RingElement> = candidates.iter().map(|l| eval(l, &a)).collect();
            match seen.get_mut(&view) {
                None => {
                    seen.insert(view, vals.into_iter().map(Some).collect());
                }
                Some(prev) => {
                    for (p, v) in prev.iter_mut().zip(vals) {
                        if p.as_ref().is_some_and(|x| *x != v) {
                            *p = None;
                        }
                    }
                }
            }
        }
    }
    let mut learnable: Vec<Learnable> = candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| seen.values().all(|vals| vals[*i].is_some()))
        .map(|(_, l)| l.clone())
        .collect();
    learnable.sort();
    Ok(CoalitionReport { coalition: c, learnable })
}

/// Per-integer travel in a Protocol 1 transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerTravel {
    pub integer: u64,
    /// Messages carrying the integer.
    pub hops: u64,
    /// Full circles completed after the first, i.e. `ceil(hops / k) - 1`.
    pub circles: u64,
    /// Whether every party still had room under its quota when it was created.
    pub unsaturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionStats {
    pub messages: u64,
    pub bits: u64,
    pub integers: Vec<IntegerTravel>,
}

impl TransmissionStats {
    /// Circle counts of the integers created while nobody was saturated.
    pub fn unsaturated_circles(&self) -> Vec<u64> {
        self.integers.iter().filter(|i| i.unsaturated).map(|i| i.circles).collect()
    }
}

/// `ceil(log2(v + 2))`.
pub fn payload_bits(v: u64) -> u64 {
    u64::from(64 - (v + 1).leading_zeros())
}

/// Message count, bit total and circle counts of the Protocol 1 part of a deal.
pub fn transmission_stats(t: &Transcript) -> Result<TransmissionStats> {
    let cfg: ProtocolConfig = serde_json::from_value(t.meta.config.clone())
        .map_err(|_| Error::input(format!("not a deal transcript: {}", t.meta.protocol)))?;
    let ProtocolConfig::Deal {
        cards,
        distribute: true,
        ..
    } = cfg
    else {
        return Err(Error::input(format!("not a Protocol 1 transcript: {}", t.meta.protocol)));
    };
    let quotas = poker::public_quotas(t)?;
    let k = t.k() as u64;
    let tokens: Vec<(PartyId, u64)> = t
        .with_label(TOKEN)
        .map(|m| Ok((m.from, m.payload.as_integer()?)))
        .collect::<Result<_>>()?;
    let bits = tokens.iter().map(|&(_, v)| payload_bits(v)).sum();
    let mut hops = vec![0u64; cards as usize + 1];
    let mut creator: Vec<Option<PartyId>> = vec![None; cards as usize + 1];
    for &(from, v) in &tokens {
        let v = v as usize;
        if v > cards as usize {
            return Err(Error::input(format!("integer {v} beyond {cards}")));
        }
        hops[v] += 1;
        creator[v].get_or_insert(from);
    }
    let mut held = vec![0u64; t.k()];
    let mut integers = Vec::new();
    for m in 0..cards {
        let unsaturated = held.iter().zip(&quotas).all(|(h, q)| h < q);
        let h = hops[m as usize];
        integers.push(IntegerTravel {
            integer: m,
            hops: h,
            circles: h.div_ceil(k).saturating_sub(1),
            unsaturated,
        });
        // the keeper of m is whoever sent m + 1 first
        if m > 0 {
            let keeper = creator[m as usize + 1].ok_or_else(|| Error::input(format!("integer {} never sent", m + 1)))?;
            held[keeper.0] += 1;
        }
    }
    Ok(TransmissionStats {
        messages: tokens.len() as u64,
        bits,
        integers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::poker::protocol1_distribute;

    fn z(m: u64) -> RingSpec {
        RingSpec::modular(m).unwrap()
    }

    #[test]
    fn sum_claims() {
        let spec = SecrecySpec::new("sum", z(2), 3, Observer::Party(PartyId(1)), vec![0, 2]).given(Given::Sum(vec![0, 2]));
        assert!(secrecy_enumeration_check(&spec).unwrap().passed());
        let spec = SecrecySpec::new("sum", z(2), 3, Observer::Party(PartyId(1)), vec![0, 2]);
        assert!(matches!(
            secrecy_enumeration_check(&spec).unwrap(),
            SecrecyVerdict::Counterexample(_)
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let spec = SecrecySpec::new("sum", z(3), 3, Observer::Party(PartyId(0)), vec![1, 2]).budget(10);
        assert!(matches!(spec.domain(), Err(Error::InvalidInput(_))));
        let spec = spec.budget(100);
        assert_eq!(
            secrecy_enumeration_check(&spec).unwrap(),
            SecrecyVerdict::BudgetExceeded { budget: 100 }
        );
    }

    #[test]
    fn coalitions() {
        let r = coalition_closure(4, &[0, 1]).unwrap();
        assert_eq!(r.learnable, vec![Learnable::Input(0), Learnable::Input(1), Learnable::SumOf(vec![2, 3])]);
        let r = coalition_closure(3, &[0, 1]).unwrap();
        assert!(r.learnable.contains(&Learnable::Input(2)));
        let r = coalition_closure(4, &[0, 2]).unwrap();
        assert_eq!(
            r.learnable,
            vec![Learnable::Input(0), Learnable::Input(1), Learnable::Input(2), Learnable::Input(3), Learnable::SumOf(vec![1, 3])]
        );
        assert!(coalition_closure(4, &[0, 1, 2, 3]).is_err());
        for k in 3..=4 {
            for c in [vec![0], vec![0, 1], vec![k - 1, 0]] {
                if c.len() < k {
                    assert_eq!(coalition_closure_brute(k, &c).unwrap(), coalition_closure(k, &c).unwrap(), "k={k} {c:?}");
                }
            }
        }
    }

    #[test]
    fn bits() {
        assert_eq!(payload_bits(0), 1);
        assert_eq!(payload_bits(1), 2);
        assert_eq!(payload_bits(2), 2);
        assert_eq!(payload_bits(6), 3);
        assert_eq!(payload_bits(7), 4);
    }

    #[test]
    fn single_integer_stats() {
        let t = protocol1_distribute(&ChannelGraph::cycle(3).unwrap(), 1, 1, RunEnv::seeded(3))
            .unwrap()
            .transcript;
        let s = transmission_stats(&t).unwrap();
        // 0 is kept by P1 on its second receipt (4 hops), then 1 circles twice minus the withheld hop
        assert_eq!(s.messages, 10);
        assert_eq!(s.integers.len(), 1);
        assert_eq!(s.integers[0].hops, 4);
        assert_eq!(s.integers[0].circles, 1);
    }
}
