//! Shared helpers for the integration and acceptance suites.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_ornate"))
}

/// Vocabulary of plain words with a "fancier" synonym for roughly a third
/// of them; the synthetic task maps each source word through the lexicon.
const PLAIN: [&str; 30] = [
    "big", "small", "old", "new", "good", "bad", "fast", "slow", "happy", "sad", "house", "road",
    "tree", "river", "stone", "cloud", "bird", "horse", "garden", "window", "walk", "talk", "look",
    "find", "make", "take", "give", "keep", "start", "end",
];
const FANCY: [(&str, &str); 10] = [
    ("big", "immense"),
    ("small", "diminutive"),
    ("old", "ancient"),
    ("good", "admirable"),
    ("bad", "dreadful"),
    ("happy", "jubilant"),
    ("house", "residence"),
    ("walk", "stroll"),
    ("look", "gaze"),
    ("find", "discover"),
];

fn embellish_word(w: &str) -> &str {
    FANCY
        .iter()
        .find(|(p, _)| *p == w)
        .map(|(_, f)| *f)
        .unwrap_or(w)
}

/// Writes `n` raw (untokenized) sentence pairs: the target is the source
/// passed through the substitution lexicon. Deterministic under `seed`.
pub fn write_synthetic_corpus(src_path: &Path, tgt_path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut src = String::new();
    let mut tgt = String::new();
    for _ in 0..n {
        let len = rng.random_range(4..=8);
        let words: Vec<&str> = (0..len)
            .map(|_| PLAIN[rng.random_range(0..PLAIN.len())])
            .collect();
        src.push_str(&words.join(" "));
        src.push_str(".\n");
        let mapped: Vec<&str> = words.iter().map(|w| embellish_word(w)).collect();
        tgt.push_str(&mapped.join(" "));
        tgt.push_str(".\n");
    }
    std::fs::write(src_path, src).unwrap();
    std::fs::write(tgt_path, tgt).unwrap();
}
