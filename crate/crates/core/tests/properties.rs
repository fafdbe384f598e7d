use proptest::prelude::*;

use ringmpc::engine::{view_of, Observer};
use ringmpc::protocols::arith::{secure_product, secure_sum};
use ringmpc::protocols::poker::{deal_deck, protocol1_distribute};
use ringmpc::protocols::secret_sharing::{reconstruct, share_secret_kk};
use ringmpc::{ChannelGraph, PartyId, Recipient, RingElement, RingSpec, RunEnv, Security, Transcript};

fn elem(v: i64) -> RingElement {
    RingElement::from(v)
}

fn ring_strategy() -> impl Strategy<Value = RingSpec> {
    prop_oneof![
        (2u64..300).prop_map(|m| RingSpec::modular(m).unwrap()),
        (1u64..1_000_000).prop_map(|b| RingSpec::integers(b).unwrap()),
    ]
}

fn inputs_in(ring: &RingSpec, raw: &[i64]) -> Vec<RingElement> {
    raw.iter().map(|&v| ring.element(v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ring_ops_stay_canonical_and_invert(
        ring in ring_strategy(),
        a in -1_000_000i64..1_000_000,
        b in -1_000_000i64..1_000_000,
    ) {
        let (x, y) = (ring.element(a), ring.element(b));
        for v in [ring.add(&x, &y), ring.sub(&x, &y), ring.mul(&x, &y), ring.neg(&x)] {
            prop_assert!(ring.contains(&v));
        }
        prop_assert_eq!(ring.sub(&ring.add(&x, &y), &y), x.clone());
        if ring.is_legal_divisor(&x) {
            prop_assert_eq!(ring.exact_div(&ring.mul(&x, &y), &x).unwrap(), y.clone());
        }
    }

    #[test]
    fn sum_matches_oracle_and_transcripts_are_sound(
        ring in ring_strategy(),
        raw in prop::collection::vec(-1_000_000i64..1_000_000, 3..7),
        seed in any::<u64>(),
    ) {
        let xs = inputs_in(&ring, &raw);
        let g = ChannelGraph::cycle(xs.len()).unwrap();
        let r = secure_sum(&ring, &g, &xs, RunEnv::seeded(seed)).unwrap();
        prop_assert_eq!(&r.outcome, &ring.sum(&xs));
        check_channel_discipline(&r.transcript, &g)?;
        check_view_soundness(&r.transcript)?;
        let again = secure_sum(&ring, &g, &xs, RunEnv::seeded(seed)).unwrap();
        prop_assert_eq!(r.transcript.to_jsonl(), again.transcript.to_jsonl());
    }

    #[test]
    fn product_matches_oracle_on_units(
        m in prop::sample::select(vec![2u64, 3, 5, 7, 11, 13, 251]),
        raw in prop::collection::vec(1i64..1000, 3..6),
        seed in any::<u64>(),
    ) {
        let ring = RingSpec::modular(m).unwrap();
        let xs: Vec<RingElement> = raw.iter().map(|&v| ring.element(v % (m as i64 - 1) + 1)).collect();
        let g = ChannelGraph::cycle(xs.len()).unwrap();
        let r = secure_product(&ring, &g, &xs, RunEnv::seeded(seed)).unwrap();
        prop_assert_eq!(r.outcome, ring.product(&xs));
    }

    #[test]
    fn jsonl_round_trips(
        raw in prop::collection::vec(0i64..1000, 3..6),
        seed in any::<u64>(),
    ) {
        let ring = RingSpec::modular(1009).unwrap();
        let xs = inputs_in(&ring, &raw);
        let t = secure_sum(&ring, &ChannelGraph::cycle(xs.len()).unwrap(), &xs, RunEnv::seeded(seed)).unwrap().transcript;
        let back = Transcript::from_jsonl(&t.to_jsonl()).unwrap();
        prop_assert_eq!(back.to_jsonl(), t.to_jsonl());
        prop_assert_eq!(back.messages, t.messages);
    }

    #[test]
    fn deals_partition_and_halt(
        cards in 1u64..40,
        k in 3usize..6,
        bound in 1u64..8,
        seed in any::<u64>(),
    ) {
        let g = ChannelGraph::cycle(k).unwrap();
        let d = protocol1_distribute(&g, cards, bound, RunEnv::seeded(seed)).unwrap();
        let mut all: Vec<u64> = d.outcome.hands.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (1..=cards).collect::<Vec<_>>());
        prop_assert!(d.outcome.hands.iter().all(|h| !h.contains(&0)));
        let sizes: Vec<u64> = d.outcome.hands.iter().map(|h| h.len() as u64).collect();
        prop_assert_eq!(&sizes, &d.outcome.quotas);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        // the final integer passes every player N+1 times
        let last = d.transcript.messages.iter().filter(|m| m.payload.as_integer().ok() == Some(cards) && m.label == "token").count();
        prop_assert!(last as u64 >= (bound + 1) * k as u64 - 1);
        check_channel_discipline(&d.transcript, &g)?;
    }

    #[test]
    fn shuffled_deals_cover_the_deck(cards in 1u64..30, seed in any::<u64>()) {
        let d = deal_deck(&ChannelGraph::cycle(3).unwrap(), cards, 4, RunEnv::seeded(seed)).unwrap().outcome;
        let mut labels = d.labelled_hands().concat();
        labels.sort_unstable();
        prop_assert_eq!(labels, (1..=cards).collect::<Vec<_>>());
    }
}

#[test]
fn sharing_reconstructs_on_500_instances() {
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(500));
    runner
        .run(
            &(
                prop::sample::select(vec![2u64, 3, 5, 7, 101, 251]),
                -1_000_000i64..1_000_000,
                3usize..=5,
                any::<u64>(),
            ),
            |(m, secret, k, seed)| {
                let ring = RingSpec::modular(m).unwrap();
                let s = ring.element(secret);
                let v = share_secret_kk(&ring, &s, k, RunEnv::seeded(seed)).unwrap();
                prop_assert_eq!(v.outcome.shares.len(), k);
                prop_assert_eq!(reconstruct(&v.outcome).unwrap(), s);
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn integer_sharing_reconstructs() {
    let ring = RingSpec::integers(1000).unwrap();
    for seed in 0..50 {
        let s = elem(seed as i64 * 7919 - 100_000);
        let v = share_secret_kk(&ring, &s, 4, RunEnv::seeded(seed)).unwrap();
        assert_eq!(reconstruct(&v.outcome).unwrap(), s);
    }
}

fn check_channel_discipline(t: &Transcript, g: &ChannelGraph) -> Result<(), TestCaseError> {
    for (i, m) in t.messages.iter().enumerate() {
        prop_assert_eq!(m.seq, i as u64);
        match m.to {
            Recipient::Party(p) => {
                let sec = g.security(m.from.0, p.0);
                prop_assert!(sec.is_some(), "message {} crosses a non-edge", m.seq);
                prop_assert_eq!(sec.unwrap() == Security::Secure, m.security == Security::Secure);
            }
            Recipient::Broadcast => prop_assert_eq!(m.security, Security::Insecure),
        }
    }
    Ok(())
}

/// Every message is seen by its sender and its receivers, and broadcasts by
/// the eavesdropper, so the union of views covers the transcript.
fn check_view_soundness(t: &Transcript) -> Result<(), TestCaseError> {
    let k = t.k();
    let views: Vec<_> = (0..k).map(|p| view_of(t, &Observer::Party(PartyId(p))).unwrap().observed()).collect();
    let eve = view_of(t, &Observer::Eavesdropper).unwrap().observed();
    for m in &t.messages {
        let seen = |v: &Vec<ringmpc::engine::ObservedEntry>| {
            v.iter().any(|(_, from, to, label, payload)| *from == m.from && *to == m.to && *label == m.label && *payload == m.payload)
        };
        prop_assert!(seen(&views[m.from.0]), "sender does not see message {}", m.seq);
        match m.to {
            Recipient::Party(p) => prop_assert!(seen(&views[p.0])),
            Recipient::Broadcast => {
                prop_assert!(seen(&eve));
                for v in &views {
                    prop_assert!(seen(v));
                }
            }
        }
    }
    Ok(())
}
