//! Property tests for the module invariants.

use proptest::prelude::*;

use ornate_core::corpus::{split_dataset, ParallelCorpus};
use ornate_core::neural::{AttentionKind, Model, ModelConfig};
use ornate_core::training::{load_checkpoint, save_checkpoint, TrainConfig};
use ornate_core::eval::{bleu, classify_output, ClassifyConfig};
use ornate_core::textpipe::{
    anonymize, build_vocabulary, deanonymize, decode_ids, encode, pair_sentences, tokenize,
    EntityMap, EntityRecognizer, RecognizedSpan, Sentence,
};

fn word() -> impl Strategy<Value = String> {
    "[a-zA-Z]{1,8}".prop_map(|s| s)
}

fn sentence(max_len: usize) -> impl Strategy<Value = Sentence> {
    prop::collection::vec(word(), 0..=max_len)
        .prop_map(|tokens| Sentence::from_tokens(tokens).unwrap())
}

fn raw_text() -> impl Strategy<Value = String> {
    // words, punctuation, clitics, placeholders, quotes and stray spacing
    prop::collection::vec(
        prop_oneof![
            word(),
            Just("don't".to_string()),
            Just("it's".to_string()),
            Just("PERSON@1".to_string()),
            Just("LOCATION@12,".to_string()),
            Just("(aside)".to_string()),
            Just("''quoted''".to_string()),
            Just("end.".to_string()),
            Just("a,b".to_string()),
            Just("what?!".to_string()),
        ],
        0..12,
    )
    .prop_map(|chunks| chunks.join(" "))
}

proptest! {
    #[test]
    fn tokenize_never_produces_empty_or_spaced_tokens(raw in raw_text()) {
        let sent = tokenize(&raw);
        for tok in sent.tokens() {
            prop_assert!(!tok.is_empty());
            prop_assert!(!tok.contains(char::is_whitespace));
        }
        // tokenizing the canonical line form is a fixed point
        let again = tokenize(&sent.to_line());
        prop_assert_eq!(again.tokens(), sent.tokens());
    }

    #[test]
    fn pairing_preserves_tokens_and_halves_length(sents in prop::collection::vec(sentence(6), 0..20)) {
        let paired = pair_sentences(&sents);
        prop_assert_eq!(paired.len(), sents.len().div_ceil(2));
        let mut before: Vec<&String> = sents.iter().flat_map(|s| s.tokens()).collect();
        let mut after: Vec<&String> = paired.iter().flat_map(|s| s.tokens()).collect();
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn vocabulary_is_deterministic_and_bounded(
        sents in prop::collection::vec(sentence(8), 1..15),
        max_size in 5usize..40,
    ) {
        let a = build_vocabulary(&sents, max_size).unwrap();
        let b = build_vocabulary(&sents, max_size).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.len() <= max_size);
        prop_assert_eq!(a.token_of(0), Some("<pad>"));
        prop_assert_eq!(a.token_of(3), Some("<unk>"));
    }

    #[test]
    fn encode_decode_round_trips_in_vocab(sents in prop::collection::vec(sentence(8), 1..10)) {
        let vocab = build_vocabulary(&sents, 50_000).unwrap();
        for s in &sents {
            let back = decode_ids(&encode(s, &vocab), &vocab).unwrap();
            prop_assert_eq!(&back, s);
        }
    }

    #[test]
    fn anonymize_round_trips_for_any_non_overlapping_spans(
        tokens in prop::collection::vec(word(), 1..12),
        starts in prop::collection::vec(any::<u8>(), 0..4),
    ) {
        struct Spans(Vec<RecognizedSpan>);
        impl EntityRecognizer for Spans {
            fn recognize(&self, _tokens: &[String]) -> Vec<RecognizedSpan> {
                self.0.clone()
            }
        }
        use ornate_core::textpipe::EntityCategory;
        let mut used = vec![false; tokens.len()];
        let mut spans = Vec::new();
        for (i, s) in starts.iter().enumerate() {
            let start = (*s as usize) % tokens.len();
            if !used[start] {
                used[start] = true;
                let category = EntityCategory::ALL[i % 4];
                spans.push(RecognizedSpan { start, len: 1, category });
            }
        }
        let sent = Sentence::from_tokens(tokens).unwrap();
        let mut scope = EntityMap::new("prop");
        let anon = anonymize(&sent, &Spans(spans), &mut scope).unwrap();
        let (restored, missing) = deanonymize(&anon, &scope);
        prop_assert_eq!(restored, sent);
        prop_assert!(missing.is_empty());
    }

    #[test]
    fn bleu_selfscore_and_bounds(sents in prop::collection::vec(sentence(8), 1..8)) {
        let nonempty: Vec<Sentence> = sents
            .into_iter()
            .map(|s| if s.is_empty() { Sentence::from_tokens(vec!["x".into()]).unwrap() } else { s })
            .collect();
        let self_score = bleu(&nonempty, &nonempty, 4).unwrap();
        prop_assert!((self_score.score - 100.0).abs() < 1e-9);

        // against a shuffled reference the score stays bounded and BP ≤ 1
        let mut shifted = nonempty.clone();
        shifted.rotate_right(1);
        let b = bleu(&nonempty, &shifted, 4).unwrap();
        prop_assert!((0.0..=100.0 + 1e-9).contains(&b.score));
        prop_assert!(b.brevity_penalty <= 1.0 + 1e-12);
        // removing the brevity penalty never decreases the score
        if b.brevity_penalty > 0.0 {
            prop_assert!(b.score / b.brevity_penalty >= b.score - 1e-9);
        }
    }

    #[test]
    fn classification_is_total(
        input in sentence(8),
        output in sentence(8),
    ) {
        // must terminate and give exactly one of the four classes
        let class = classify_output(&input, &output, &ClassifyConfig::default());
        prop_assert!(ornate_core::eval::OutputClass::ALL.contains(&class));
    }

    #[test]
    fn checkpoints_round_trip_across_shapes(
        num_layers in 1usize..3,
        hidden in 1usize..7,
        embedding in 1usize..7,
        vocab in 5usize..24,
        dot in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = ModelConfig {
            num_layers,
            hidden_size: hidden,
            embedding_size: embedding,
            vocab_size: vocab,
            dropout_rate: 0.1,
            attention: if dot { AttentionKind::Dot } else { AttentionKind::General },
            finetune_embeddings: !dot,
        };
        let model = Model::<f32>::init(cfg, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &TrainConfig::default(), seed, 0, &path).unwrap();
        let loaded = load_checkpoint::<f32>(&path).unwrap();
        prop_assert!(loaded.model.values_equal(&model));
        prop_assert_eq!(loaded.model.config(), model.config());
    }

    #[test]
    fn dataset_split_partitions(
        n in 3usize..60,
        seed in any::<u64>(),
    ) {
        let side: Vec<Sentence> = (0..n)
            .map(|i| Sentence::from_tokens(vec![format!("s{i}")]).unwrap())
            .collect();
        let corpus = ParallelCorpus::new(side.clone(), side);
        let split = split_dataset(&corpus, (0.6, 0.2, 0.2), seed).unwrap();
        let total = split.train.len() + split.valid.len() + split.test.len();
        prop_assert_eq!(total, n);
        let mut all: Vec<String> = split
            .train
            .source()
            .iter()
            .chain(split.valid.source())
            .chain(split.test.source())
            .map(|s| s.to_line())
            .collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), n); // disjoint and exhaustive

        let again = split_dataset(&corpus, (0.6, 0.2, 0.2), seed).unwrap();
        prop_assert_eq!(split.train.source(), again.train.source());
    }
}
