use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use m3fed_bench::{cargo_config, cargo_states, trained_cargo, traffic};
use m3fed_core::inference::{classify, score, DetectionThresholds};
use m3fed_core::model::{aggregate, M3Model};

fn update(c: &mut Criterion) {
    let states = cargo_states(&traffic(1, 2, 20));
    let mut g = c.benchmark_group("update");
    g.throughput(Throughput::Elements(states.len() as u64));
    g.bench_function("train_from_empty", |b| {
        b.iter_batched(
            || M3Model::empty(cargo_config()),
            |mut m| {
                m.train(&states);
                m
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn score_records(c: &mut Criterion) {
    let model = trained_cargo(&traffic(1, 3, 20));
    let probes = cargo_states(&traffic(2, 1, 20));
    let th = DetectionThresholds::default();
    let mut g = c.benchmark_group("score");
    g.throughput(Throughput::Elements(probes.len() as u64));
    g.bench_function("score_and_classify", |b| {
        b.iter(|| {
            probes
                .iter()
                .filter(|x| classify(&score(&model, x), &th).is_anomaly())
                .count()
        })
    });
    g.finish();
}

fn aggregate_models(c: &mut Criterion) {
    let global = trained_cargo(&traffic(1, 5, 20));
    let locals: Vec<M3Model> = (10..13).map(|s| trained_cargo(&traffic(s, 1, 20))).collect();
    let mut inputs = vec![&global];
    inputs.extend(locals.iter());
    c.bench_function("aggregate/global_plus_3_clients", |b| {
        b.iter(|| aggregate(black_box(&inputs)).unwrap())
    });
}

fn serialize(c: &mut Criterion) {
    let model = trained_cargo(&traffic(1, 5, 20));
    let bytes = model.to_bytes();
    let mut g = c.benchmark_group("serialize");
    g.throughput(Throughput::Bytes(bytes.len() as u64));
    g.bench_function("to_bytes", |b| b.iter(|| black_box(&model).to_bytes()));
    g.bench_function("from_bytes", |b| b.iter(|| M3Model::from_bytes(black_box(&bytes)).unwrap()));
    g.finish();
}

criterion_group!(benches, update, score_records, aggregate_models, serialize);
criterion_main!(benches);
