use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ringmpc::analysis::{secrecy_enumeration_check, Given, SecrecySpec};
use ringmpc::engine::Observer;
use ringmpc::protocols::arith::{secure_product, secure_sum};
use ringmpc::protocols::commitment::{commit3, decommit3, SplitMode};
use ringmpc::protocols::poker::{deal_deck, knuth_shuffle};
use ringmpc::protocols::secret_sharing::share_secret_kk;
use ringmpc::{ChannelGraph, PartyId, RingElement, RingSpec, RunEnv};

fn arithmetic(c: &mut Criterion) {
    let ring = RingSpec::modular(1_000_003).unwrap();
    let mut group = c.benchmark_group("secure_sum");
    for k in [3usize, 8, 32] {
        let g = ChannelGraph::cycle(k).unwrap();
        let xs: Vec<RingElement> = (0..k as i64).map(RingElement::from).collect();
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| secure_sum(&ring, &g, black_box(&xs), RunEnv::seeded(1)).unwrap())
        });
    }
    group.finish();
    let g = ChannelGraph::cycle(5).unwrap();
    let xs: Vec<RingElement> = (1..=5).map(RingElement::from).collect();
    c.bench_function("secure_product/5", |b| {
        b.iter(|| secure_product(&ring, &g, black_box(&xs), RunEnv::seeded(1)).unwrap())
    });
}

fn commitment(c: &mut Criterion) {
    let ring = RingSpec::modular(101).unwrap();
    let g = ChannelGraph::cycle(3).unwrap();
    let xs = [RingElement::from(4), RingElement::from(5), RingElement::from(6)];
    c.bench_function("commit3+decommit3", |b| {
        b.iter(|| {
            let mut l = commit3(&ring, &g, &xs, SplitMode::Integer, RunEnv::seeded(2)).unwrap().outcome;
            decommit3(&ring, &g, &mut l, RunEnv::seeded(2)).unwrap()
        })
    });
}

fn dealing(c: &mut Criterion) {
    let g = ChannelGraph::cycle(3).unwrap();
    let mut group = c.benchmark_group("deal_deck");
    for n in [2u64, 10] {
        group.bench_with_input(BenchmarkId::new("52 cards, N", n), &n, |b, &n| {
            b.iter(|| deal_deck(&g, 52, n, RunEnv::seeded(3)).unwrap())
        });
    }
    group.finish();
    c.bench_function("knuth_shuffle/52", |b| b.iter(|| knuth_shuffle(&g, 52, RunEnv::seeded(4)).unwrap()));
}

fn sharing(c: &mut Criterion) {
    let ring = RingSpec::modular(251).unwrap();
    c.bench_function("share_secret_kk/5", |b| {
        b.iter(|| share_secret_kk(&ring, &RingElement::from(42), 5, RunEnv::seeded(5)).unwrap())
    });
}

fn enumeration(c: &mut Criterion) {
    let spec = SecrecySpec::new("sum", RingSpec::modular(3).unwrap(), 3, Observer::Party(PartyId(0)), vec![1, 2])
        .given(Given::Sum(vec![1, 2]));
    let mut group = c.benchmark_group("secrecy");
    group.sample_size(10);
    group.bench_function("sum Z_3 k=3", |b| b.iter(|| secrecy_enumeration_check(&spec).unwrap()));
    group.finish();
}

criterion_group!(benches, arithmetic, commitment, dealing, sharing, enumeration);
criterion_main!(benches);
