use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use summoning::feasibility::check_unrestricted_bruteforce_with;
use summoning::fixtures;
use summoning::oracle::{exhaustive_search_with, parity_certificate_with, DEFAULT_CAP};
use summoning::protocol::{plan_chain_protocol, simulate_all_patterns_with};
use summoning::{Exec, TaskMode};

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn strategy_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("exhaustive_search");
    // full sweep: no valid strategy exists
    let triangle = fixtures::cyclic_triangle().with_mode(TaskMode::UnrestrictedCalls);
    // long sweep before the first hit
    let dominant = fixtures::all_dominant_triangle();
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::new("cyclic-triangle", name), &exec, |b, &exec| {
            b.iter(|| exhaustive_search_with(&triangle, DEFAULT_CAP, exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("all-dominant-triangle", name), &exec, |b, &exec| {
            b.iter(|| exhaustive_search_with(&dominant, DEFAULT_CAP, exec).unwrap())
        });
    }
    group.finish();
}

fn parity(c: &mut Criterion) {
    let mut group = c.benchmark_group("parity_certificate");
    let triangle = fixtures::cyclic_triangle().with_mode(TaskMode::UnrestrictedCalls);
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::new("cyclic-triangle", name), &exec, |b, &exec| {
            b.iter(|| parity_certificate_with(&triangle, &[1, 2, 3], DEFAULT_CAP, exec).unwrap())
        });
    }
    group.finish();
}

fn pattern_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_all_patterns");
    let plan = plan_chain_protocol(&fixtures::chain(12)).unwrap();
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::new("chain12", name), &exec, |b, &exec| {
            b.iter(|| simulate_all_patterns_with(&plan, exec).unwrap())
        });
    }
    group.finish();
}

fn bruteforce(c: &mut Criterion) {
    let mut group = c.benchmark_group("bruteforce_feasibility");
    // feasible, so every one of the 2^16 subsets is examined
    let task = fixtures::chain(16);
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::new("chain16", name), &exec, |b, &exec| {
            b.iter(|| check_unrestricted_bruteforce_with(&task, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = strategy_search, parity, pattern_sweep, bruteforce
}
criterion_main!(benches);
