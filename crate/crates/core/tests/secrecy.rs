//! Exhaustive secrecy and transcript-shape properties over small rings.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use ringmpc::analysis::{
    coalition_closure, coalition_closure_brute, secrecy_enumeration_check, Given, Scope, SecrecySpec, SecrecyVerdict,
};
use ringmpc::engine::{view_of, ObservedEntry, Observer};
use ringmpc::protocols::arith::{dummy_triangle, example_f1, example_f2, UnaryFn};
use ringmpc::protocols::commitment::ot_dummy;
use ringmpc::protocols::poker::CollectiveRandom;
use ringmpc::protocols::secret_sharing::share_secret_kk;
use ringmpc::{run, ChannelGraph, Odometer, PartyId, Recipient, RingElement, RingSpec, RunEnv};

fn z(m: u64) -> RingSpec {
    RingSpec::modular(m).unwrap()
}

fn party(i: usize) -> Observer {
    Observer::Party(PartyId(i))
}

fn assert_pass(spec: SecrecySpec) {
    let v = secrecy_enumeration_check(&spec).unwrap();
    assert!(
        matches!(v, SecrecyVerdict::Pass { .. }),
        "{} over {} observer {}: {v:?}",
        spec.protocol,
        spec.ring,
        spec.observer
    );
}

fn e(v: i64) -> RingElement {
    RingElement::from(v)
}

#[test]
fn product_views_before_broadcast_hide_other_inputs() {
    for obs in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&i| i != obs).collect();
        assert_pass(
            SecrecySpec::new("product", z(5), 3, party(obs), others)
                .units_only()
                .scope(Scope::BeforeFirstBroadcast),
        );
    }
}

#[test]
fn product_broadcast_reveals_the_rest() {
    // After the broadcast each party knows the product, hence the product of the others.
    let v = secrecy_enumeration_check(&SecrecySpec::new("product", z(5), 3, party(0), vec![1, 2]).units_only()).unwrap();
    assert!(matches!(v, SecrecyVerdict::Counterexample(_)));
}

#[test]
fn rating_hides_individual_votes() {
    for obs in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&i| i != obs).collect();
        assert_pass(SecrecySpec::new("rating", z(3), 3, party(obs), others.clone()).given(Given::Sum(others)));
    }
}

#[test]
fn example_views_hide_what_they_should() {
    // P0 and P2 only see masked values in f1
    assert_pass(SecrecySpec::new("example_f1", z(5), 3, party(0), vec![1, 2]));
    assert_pass(SecrecySpec::new("example_f1", z(5), 3, party(2), vec![0, 1]));
    // f2 over units: P1 sees only a0, P0 sees only a0 n2 c0
    assert_pass(SecrecySpec::new("example_f2", z(5), 3, party(1), vec![0, 2]).units_only());
    assert_pass(SecrecySpec::new("example_f2", z(5), 3, party(0), vec![1, 2]).units_only());
}

/// For each message position, the set of payloads seen across all mask
/// choices. A position carrying a bare product would be a singleton equal to it.
fn payloads_by_position(
    mut go: impl FnMut(RunEnv<'static>) -> ringmpc::Transcript,
    masks_nonzero: impl Fn(&ringmpc::Transcript) -> bool,
) -> BTreeMap<u64, HashSet<RingElement>> {
    let odo = Odometer::new(5);
    let mut out: BTreeMap<u64, HashSet<RingElement>> = BTreeMap::new();
    loop {
        let t = go(RunEnv::with_tapes(odo.clone()));
        if masks_nonzero(&t) {
            for m in &t.messages {
                out.entry(m.seq).or_default().insert(m.payload.as_element().unwrap().clone());
            }
        }
        if !odo.advance() {
            return out;
        }
    }
}

#[test]
fn intermediate_products_never_travel_in_the_clear() {
    let ring = z(5);
    let g = ChannelGraph::cycle(3).unwrap();
    for a in 0..5 {
        for b in 0..5 {
            for c in 0..5 {
                let xs = [e(a), e(b), e(c)];
                let p12 = ring.mul(&xs[0], &xs[1]);
                let p23 = ring.mul(&xs[1], &xs[2]);
                let f1 = payloads_by_position(
                    |env| example_f1(&ring, &g, &xs, env).unwrap().transcript,
                    |t| !t.local(PartyId(1), "n0").unwrap().as_element().unwrap().is_zero(),
                );
                for (seq, seen) in &f1 {
                    assert!(seen.len() > 1, "f1 {xs:?} seq {seq} is constant {seen:?}");
                    let only = |v: &RingElement| seen.len() == 1 && seen.contains(v);
                    assert!(!only(&p12) && !only(&p23));
                }
                if [a, b, c].iter().all(|&x| x != 0) {
                    let f2 = payloads_by_position(
                        |env| example_f2(&ring, &g, &xs, &UnaryFn::Identity, env).unwrap().transcript,
                        |_| true,
                    );
                    for (seq, seen) in &f2 {
                        assert!(seen.len() > 1, "f2 {xs:?} seq {seq} is constant {seen:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn commit3_trit_hiding() {
    assert_pass(SecrecySpec::new("commit3", z(3), 3, party(1), vec![0, 2]));
    assert_pass(SecrecySpec::new("commit3", z(3), 3, party(0), vec![1, 2]).given(Given::Sum(vec![1, 2])));
    assert_pass(SecrecySpec::new("commit3", z(3), 3, party(2), vec![0, 1]).given(Given::Sum(vec![0, 1])));
}

#[test]
fn commit2_each_side_hides_from_the_other() {
    assert_pass(SecrecySpec::new("commit2", z(2), 2, party(0), vec![1]));
    assert_pass(SecrecySpec::new("commit2", z(2), 2, party(1), vec![0]));
    assert_pass(SecrecySpec::new("commit2", z(2), 2, party(2), vec![0, 1]).given(Given::Sum(vec![0, 1])));
}

#[test]
fn commit3_p1_learns_the_sum_and_no_more() {
    // Without the allowance the claim must fail, or the check would be vacuous.
    let v = secrecy_enumeration_check(&SecrecySpec::new("commit3", z(2), 3, party(0), vec![1, 2])).unwrap();
    assert!(matches!(v, SecrecyVerdict::Counterexample(_)));
}

#[test]
fn millionaires_dummy_learns_only_the_difference() {
    assert_pass(
        SecrecySpec::new("millionaires", z(7), 2, party(2), vec![0, 1])
            .given(Given::Difference(0, 1))
            .max_gap(3),
    );
    let v = secrecy_enumeration_check(&SecrecySpec::new("millionaires", z(7), 2, party(2), vec![0, 1]).max_gap(3)).unwrap();
    assert!(matches!(v, SecrecyVerdict::Counterexample(_)));
}

#[test]
fn ot_receiver_is_always_right_and_talks_only_to_the_dummy() {
    let ring = z(5);
    let g = dummy_triangle();
    for n in 1..=4usize {
        let msgs: Vec<RingElement> = (0..n as i64).map(|i| e((3 * i + 1) % 5)).collect();
        for mask in 1u32..1 << n {
            let idx: Vec<usize> = (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect();
            let odo = Odometer::new(5);
            let mut runs = 0;
            loop {
                let r = ot_dummy(&ring, &g, &msgs, &idx, RunEnv::with_tapes(odo.clone())).unwrap();
                let want: Vec<RingElement> = idx.iter().map(|&j| msgs[j - 1].clone()).collect();
                assert_eq!(r.outcome, want);
                let between: Vec<_> = r
                    .transcript
                    .messages
                    .iter()
                    .filter(|m| {
                        let (a, b) = (m.from.0, match m.to {
                            Recipient::Party(p) => p.0,
                            Recipient::Broadcast => usize::MAX,
                        });
                        (a == 0 && b == 1) || (a == 1 && b == 0)
                    })
                    .collect();
                assert_eq!(between.len(), 1);
                assert_eq!((between[0].from.0, between[0].label.as_str()), (0, "s"));
                assert_eq!(between[0].seq, 1, "the A to B split goes out during setup");
                runs += 1;
                if !odo.advance() {
                    break;
                }
            }
            assert_eq!(runs, 5usize.pow(n as u32));
        }
    }
}

#[test]
fn protocol2_output_is_uniform_whatever_one_contributor_sends() {
    let g = ChannelGraph::cycle(3).unwrap();
    for modulus in 2..=7u64 {
        for fixed in 0..modulus {
            let p = CollectiveRandom::new(g.clone(), modulus, 0, [1, 2]).with_fixed(fixed);
            let odo = Odometer::new(modulus);
            let mut dist: HashMap<u64, BigRational> = HashMap::new();
            loop {
                let r = run(&p, RunEnv::with_tapes(odo.clone())).unwrap();
                *dist.entry(r.outcome).or_insert_with(BigRational::zero) += odo.weight();
                if !odo.advance() {
                    break;
                }
            }
            let each = BigRational::new(BigInt::one(), BigInt::from(modulus));
            assert_eq!(dist.len() as u64, modulus);
            assert!(dist.values().all(|p| *p == each), "M={modulus} fixed={fixed}: {dist:?}");
        }
    }
}

type Joint = HashMap<(Vec<ObservedEntry>, Vec<RingElement>), BigRational>;

/// Joint distribution of (observer view, final shares) over all randomness.
fn share_joint(ring: &RingSpec, secret: i64, k: usize, observer: &Observer, weight: &BigRational) -> Joint {
    let odo = Odometer::new(ring.modulus().unwrap().try_into().unwrap());
    let mut joint = Joint::new();
    loop {
        let r = share_secret_kk(ring, &e(secret), k, RunEnv::with_tapes(odo.clone())).unwrap();
        let shares: Vec<RingElement> = r.outcome.shares.iter().map(|s| s.clone().unwrap()).collect();
        let view = view_of(&r.transcript, observer).unwrap().observed();
        *joint.entry((view, shares)).or_insert_with(BigRational::zero) += odo.weight() * weight;
        if !odo.advance() {
            return joint;
        }
    }
}

#[test]
fn dealer_view_is_independent_of_the_final_shares() {
    for m in [2u64, 3] {
        let ring = z(m);
        let k = 3;
        for secret in 0..m as i64 {
            let joint = share_joint(&ring, secret, k, &party(k), &BigRational::one());
            let mut by_view: HashMap<Vec<ObservedEntry>, Vec<(Vec<RingElement>, BigRational)>> = HashMap::new();
            for ((v, s), p) in joint {
                by_view.entry(v).or_default().push((s, p));
            }
            let consistent = m.pow(k as u32 - 1) as usize;
            for (_, rows) in by_view {
                let total: BigRational = rows.iter().map(|r| r.1.clone()).sum();
                assert_eq!(rows.len(), consistent, "Z_{m} N={secret}: some share vectors missing for a dealer view");
                for (s, p) in rows {
                    assert_eq!(ring.sum(&s), e(secret));
                    assert_eq!(p / &total, BigRational::new(BigInt::one(), BigInt::from(consistent)));
                }
            }
        }
    }
}

#[test]
fn coalition_of_k_minus_1_cannot_pin_the_last_share() {
    let ring = z(2);
    let k = 3;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for missing in 0..k {
        let coalition: Vec<PartyId> = (0..k).filter(|&i| i != missing).map(PartyId).collect();
        let obs = Observer::Coalition(coalition.clone());
        let mut by_view: HashMap<Vec<ObservedEntry>, HashMap<RingElement, BigRational>> = HashMap::new();
        for secret in 0..2 {
            for ((v, s), p) in share_joint(&ring, secret, k, &obs, &half) {
                // the coalition also holds its own shares
                let own: Vec<RingElement> = coalition.iter().map(|c| s[c.0].clone()).collect();
                let mut key = v;
                key.extend(own.into_iter().map(|x| {
                    (ringmpc::engine::EntryKind::Local, PartyId(0), Recipient::Party(PartyId(0)), "own".into(), x.into())
                }));
                *by_view.entry(key).or_default().entry(s[missing].clone()).or_insert_with(BigRational::zero) += p;
                // with N public the missing share is fixed
                assert_eq!(ring.sub(&e(secret), &ring.sum(coalition.iter().map(|c| &s[c.0]))), s[missing]);
            }
        }
        for (_, d) in by_view {
            assert_eq!(d.len(), 2, "missing share P{missing} pinned by the coalition view");
            let vals: Vec<_> = d.values().collect();
            assert_eq!(vals[0], vals[1]);
        }
    }
}

#[test]
fn coalition_closure_matches_brute_force_up_to_5() {
    for k in 3..=5usize {
        for mask in 1u32..(1 << k) - 1 {
            let c: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            assert_eq!(coalition_closure(k, &c).unwrap(), coalition_closure_brute(k, &c).unwrap(), "k={k} {c:?}");
        }
    }
}
