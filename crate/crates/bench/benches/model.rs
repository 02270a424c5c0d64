//! Model throughput: forward, backward, and incremental decoding.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use std::hint::black_box;

use wasa_bench::fixture;
use wasa_core::model::DecodeSession;

fn bench_forward_backward(c: &mut Criterion) {
    let f = fixture();
    let block = f.blocks[0].clone();

    let mut group = c.benchmark_group("model");
    group.throughput(Throughput::Elements(block.len() as u64));
    group.bench_function("forward_block128", |b| {
        b.iter(|| f.model.forward(black_box(&block)).unwrap())
    });
    group.bench_function("backward_block128", |b| {
        b.iter(|| f.model.backward(black_box(&block)).unwrap())
    });
    group.finish();
}

fn bench_decode(c: &mut Criterion) {
    let f = fixture();
    let prompt: Vec<u32> = f.blocks[0].ids[..64].to_vec();

    let mut group = c.benchmark_group("decode");
    group.bench_function("prime_64_tokens", |b| {
        b.iter(|| {
            let mut s = DecodeSession::new(&f.model);
            s.prime(black_box(&prompt)).unwrap();
            s
        })
    });
    let mut primed = DecodeSession::new(&f.model);
    primed.prime(&prompt).unwrap();
    group.bench_function("push_one_token", |b| {
        b.iter_batched(
            || primed.clone(),
            |mut s| s.push(black_box(4)).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
    group.bench_function("word_logits", |b| b.iter(|| black_box(primed.word_logits())));
    group.finish();
}

criterion_group!(benches, bench_forward_backward, bench_decode);
criterion_main!(benches);
