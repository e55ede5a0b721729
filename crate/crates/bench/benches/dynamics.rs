use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use hk_noise::walk::first_passage_tc;
use hk_noise::{derive_stream, run_episode, step_noisy, NoiseParams, RecordMode};
use hk_noise_bench::{figure_episode, noisy_params, spread_state};

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_noisy");
    for n in [10, 100, 1000] {
        let state = spread_state(n);
        let params = noisy_params(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| step_noisy(black_box(&state), &params, 0.0).unwrap())
        });
    }
    group.finish();
}

fn episode(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode");
    group.sample_size(20);
    for (name, leader, record) in [
        ("oriented/none", false, RecordMode::None),
        ("oriented/metrics", false, RecordMode::Metrics),
        ("leader/none", true, RecordMode::None),
    ] {
        let cfg = figure_episode(leader, record, 10_000_000);
        let mut run = 0;
        group.bench_function(name, |b| {
            b.iter(|| {
                run += 1;
                run_episode(&cfg, &mut derive_stream(1, run)).unwrap()
            })
        });
    }
    group.finish();
}

fn walk(c: &mut Criterion) {
    let noise = NoiseParams::new(0.048, 0.05).unwrap();
    let mut run = 0;
    c.bench_function("first_passage_c0.5", |b| {
        b.iter(|| {
            run += 1;
            first_passage_tc(&noise, 0.5, &mut derive_stream(1, run), 10_000_000).unwrap()
        })
    });
}

criterion_group!(benches, step, episode, walk);
criterion_main!(benches);
