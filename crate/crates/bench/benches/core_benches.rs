use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hmmbench_core::em::{bw_step, TrainConfig};
use hmmbench_core::inference::{forward, viterbi};
use hmmbench_core::optimize::{aro_run, FnObjective, SearchConfig};
use hmmbench_core::{sample, Codec, HmmModel, ObservationSequence};

fn forward_bench(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = HmmModel::random_discrete(4, 20, &mut rng);
    let mut group = c.benchmark_group("forward");
    for t in [64usize, 512, 928] {
        let (_, obs) = sample(&model, t, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(t), &obs, |b, obs| {
            b.iter(|| forward(black_box(&model), black_box(obs)).unwrap().log_likelihood)
        });
    }
    group.finish();
}

fn viterbi_bench(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = HmmModel::random_discrete(4, 20, &mut rng);
    let (_, obs) = sample(&model, 256, &mut rng);
    c.bench_function("viterbi/256", |b| {
        b.iter(|| viterbi(black_box(&model), black_box(&obs)).unwrap())
    });
}

fn bw_step_bench(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = HmmModel::random_discrete(4, 20, &mut rng);
    let generator = HmmModel::random_discrete(4, 20, &mut rng);
    let dataset: Vec<ObservationSequence> =
        (0..10).map(|_| sample(&generator, 64, &mut rng).1).collect();
    let config = TrainConfig::default();
    c.bench_function("bw_step/10x64", |b| {
        b.iter(|| bw_step(black_box(&model), black_box(&dataset), &config).unwrap())
    });
}

fn aro_sphere_bench(c: &mut Criterion) {
    let codec = Codec::uniform(3, 4, 8, -8.0, 8.0).unwrap();
    let config = SearchConfig {
        iterations: 500,
        ..SearchConfig::default()
    };
    c.bench_function("aro/sphere-500", |b| {
        b.iter(|| {
            let mut objective = FnObjective::new(|x: &[f64]| -x.iter().map(|v| v * v).sum::<f64>());
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            aro_run(&mut objective, &codec, &config, &mut rng).unwrap().best_fitness
        })
    });
}

fn codec_bench(c: &mut Criterion) {
    let codec = Codec::uniform(110, 1, 8, 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let chromosome = codec.random_chromosome(&mut rng);
    c.bench_function("codec/decode-110vars", |b| {
        b.iter(|| codec.decode(black_box(&chromosome)))
    });
}

criterion_group!(
    benches,
    forward_bench,
    viterbi_bench,
    bw_step_bench,
    aro_sphere_bench,
    codec_bench
);
criterion_main!(benches);
