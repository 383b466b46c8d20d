use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use std::hint::black_box;

use ornate_bench::{bench_setup, sample_sentences};
use ornate_core::eval::bleu;
use ornate_core::neural::{forward_loss_batch, Graph};
use ornate_core::textpipe::tokenize;

fn bench_tokenize(c: &mut Criterion) {
    let raw = "She said: ''PERSON@2 was a real suck-up to aristocratic PERSON@3.'' \
               You're fired, aren't you? (He didn't mind.)";
    let mut group = c.benchmark_group("tokenize");
    group.throughput(Throughput::Bytes(raw.len() as u64));
    group.bench_function("mixed_punctuation_line", |b| {
        b.iter(|| tokenize(black_box(raw)))
    });
    group.finish();
}

fn bench_bleu(c: &mut Criterion) {
    let hyps = sample_sentences(500, 15, 800, 1);
    let refs = sample_sentences(500, 15, 800, 2);
    c.bench_function("bleu/500x15", |b| {
        b.iter(|| bleu(black_box(&hyps), black_box(&refs), 4).unwrap())
    });
}

fn bench_forward_backward(c: &mut Criterion) {
    let (model, _vocab, batch) = bench_setup(32, 12);
    c.bench_function("seq2seq/forward_b32_t12_h128", |b| {
        b.iter(|| {
            let mut g = Graph::attached(&model);
            let fwd = forward_loss_batch(&mut g, &model, black_box(&batch), None).unwrap();
            black_box(g.value(fwd.loss).item())
        })
    });
    c.bench_function("seq2seq/forward_backward_b32_t12_h128", |b| {
        b.iter(|| {
            let mut g = Graph::attached(&model);
            let fwd = forward_loss_batch(&mut g, &model, black_box(&batch), None).unwrap();
            black_box(g.backward(fwd.loss).unwrap())
        })
    });
}

criterion_group!(benches, bench_tokenize, bench_bleu, bench_forward_backward);
criterion_main!(benches);
