//! Solver benchmarks: parallel against sequential candidate evaluation, and
//! exact enumeration against the coloring heuristic, on a generated network.
//!
//! Run with `cargo bench -p miim-core`. Build with
//! `--no-default-features` to measure the purely sequential build.

use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use miim_core::cascade::run_cascade;
use miim_core::fuzz::{random_network, FuzzConfig};
use miim_core::solver::{
    damage_for_sets, damage_for_sets_seq, exact_k_list, heuristic_k_list, ContingencyQuery,
};
use miim_core::{EntityId, EvaluationMode, JointNetwork};

fn bench_net(seed: u64) -> JointNetwork {
    let mut cfg = FuzzConfig::medium();
    cfg.buses = (14, 14);
    cfg.comm = (5, 5);
    cfg.coupling = (2, 2);
    random_network(seed, &cfg)
}

fn all_pairs(net: &JointNetwork) -> Vec<BTreeSet<EntityId>> {
    let nodes: Vec<EntityId> = net.node_ids().into_iter().collect();
    let mut sets = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            sets.push(BTreeSet::from([a.clone(), b.clone()]));
        }
    }
    sets
}

fn candidate_evaluation(c: &mut Criterion) {
    let net = bench_net(7);
    let pairs = all_pairs(&net);
    let mut group = c.benchmark_group("pair-damage");
    group.sample_size(20);
    group.bench_with_input(
        BenchmarkId::new("default", pairs.len()),
        &pairs,
        |b, pairs| b.iter(|| damage_for_sets(&net, pairs, EvaluationMode::Miim).unwrap()),
    );
    group.bench_with_input(
        BenchmarkId::new("sequential", pairs.len()),
        &pairs,
        |b, pairs| b.iter(|| damage_for_sets_seq(&net, pairs, EvaluationMode::Miim).unwrap()),
    );
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let net = bench_net(7);
    let mut group = c.benchmark_group("k2-list");
    group.sample_size(20);
    group.bench_function("exact", |b| {
        b.iter(|| exact_k_list(&net, &ContingencyQuery::new(2, EvaluationMode::Miim)).unwrap())
    });
    group.bench_function("heuristic", |b| {
        b.iter(|| heuristic_k_list(&net, &ContingencyQuery::new(2, EvaluationMode::Miim)).unwrap())
    });
    group.finish();
}

fn single_cascade(c: &mut Criterion) {
    let net = bench_net(7);
    let seed: BTreeSet<EntityId> = net.node_ids().into_iter().take(1).collect();
    c.bench_function("cascade-to-steady", |b| {
        b.iter(|| run_cascade(&net, &seed, EvaluationMode::Miim).unwrap())
    });
}

criterion_group!(benches, candidate_evaluation, solvers, single_cascade);
criterion_main!(benches);
