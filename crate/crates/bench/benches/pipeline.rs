use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use pseudolabel::clustering::assign_frames;
use pseudolabel::{extract_mfcc39, plan_batches, sample_masks, MaskSpec, MfccConfig, OrderPolicy, PayloadUnit};
use pseudolabel_bench::{codebook, features, lengths, waveform};

fn assign(c: &mut Criterion) {
    let mut g = c.benchmark_group("assign");
    let frames = features(2000, 39, 1);
    g.throughput(Throughput::Elements(2000));
    for k in [100, 500] {
        let cb = codebook(k, 39, 2);
        g.bench_with_input(BenchmarkId::from_parameter(k), &cb, |b, cb| {
            b.iter(|| assign_frames(cb, black_box(&frames)).unwrap())
        });
    }
    g.finish();
}

fn mfcc(c: &mut Criterion) {
    let wave = waveform(10.0, 3);
    let cfg = MfccConfig::default();
    let mut g = c.benchmark_group("mfcc39");
    g.throughput(Throughput::Elements(wave.samples.len() as u64));
    g.bench_function("10s", |b| b.iter(|| extract_mfcc39(black_box(&wave), &cfg).unwrap()));
    g.finish();
}

fn batching(c: &mut Criterion) {
    let lens = lengths(10_000, 4);
    c.bench_function("plan_batches/10k", |b| {
        b.iter(|| plan_batches(black_box(&lens), 45_000_000, OrderPolicy::SortedDescending, PayloadUnit::Samples).unwrap())
    });
    let spec = MaskSpec::default();
    c.bench_function("sample_masks/1500", |b| b.iter(|| sample_masks(black_box(1500), &spec).unwrap()));
}

criterion_group!(benches, assign, mfcc, batching);
criterion_main!(benches);
