//! Shared builders for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ornate_core::neural::{Model, ModelConfig, PaddedBatch};
use ornate_core::textpipe::{build_vocabulary, encode, Sentence, Vocabulary};

pub fn sample_sentences(n: usize, len: usize, vocab_words: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.random_range(0..vocab_words)))
                .collect();
            Sentence::from_tokens(tokens).unwrap()
        })
        .collect()
}

pub fn bench_model(hidden: usize, vocab: &Vocabulary) -> Model<f32> {
    Model::init(
        ModelConfig {
            num_layers: 2,
            hidden_size: hidden,
            embedding_size: 64,
            vocab_size: vocab.len(),
            dropout_rate: 0.0,
            ..ModelConfig::default()
        },
        7,
    )
    .unwrap()
}

pub fn bench_setup(batch: usize, len: usize) -> (Model<f32>, Vocabulary, PaddedBatch) {
    let sentences = sample_sentences(batch, len, 200, 3);
    let vocab = build_vocabulary(&sentences, 50_000).unwrap();
    let pairs: Vec<(Vec<u32>, Vec<u32>)> = sentences
        .iter()
        .map(|s| (encode(s, &vocab), encode(s, &vocab)))
        .collect();
    let model = bench_model(128, &vocab);
    (model, vocab, PaddedBatch::from_pairs(&pairs))
}
