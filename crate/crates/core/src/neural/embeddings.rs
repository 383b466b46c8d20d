//! Pretrained word-embedding loader (GloVe-style text format).

use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::model::ModelConfig;
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::NeuralError;
use crate::textpipe::Vocabulary;

/// How much of the vocabulary was covered by the embedding file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingCoverage {
    pub found: usize,
    pub missing: usize,
}

impl EmbeddingCoverage {
    pub fn fraction(&self) -> f64 {
        let total = self.found + self.missing;
        if total == 0 {
            0.0
        } else {
            self.found as f64 / total as f64
        }
    }
}

/// Loads a whitespace-separated embedding file (`token v1 … vE` per line)
/// into a (vocab × embedding) table. Rows for tokens found in the file are
/// copied verbatim; all other rows (special tokens and placeholders
/// included) are initialized uniform [-0.1, 0.1] from `seed`.
pub fn load_pretrained_embeddings<F: Scalar>(
    path: &Path,
    vocab: &Vocabulary,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(Tensor<F>, EmbeddingCoverage), NeuralError> {
    let io = |source| NeuralError::Io {
        path: path.display().to_string(),
        source,
    };
    let dim = cfg.embedding_size;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut table = Tensor::<F>::uniform(&[cfg.vocab_size, dim], -0.1, 0.1, &mut rng);
    let mut filled = vec![false; cfg.vocab_size];

    let file = std::fs::File::open(path).map_err(io)?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(NeuralError::BadEmbeddingLine {
                path: path.display().to_string(),
                line: i + 1,
                reason: format!("expected {dim} values, found {}", values.len()),
            });
        }
        if !vocab.contains(token) {
            continue;
        }
        let id = vocab.id_of(token) as usize;
        if id >= cfg.vocab_size || filled[id] {
            continue; // ids beyond the model table, or a duplicate line (first wins)
        }
        for (j, raw) in values.iter().enumerate() {
            let v = F::parse_str(raw).ok_or_else(|| NeuralError::BadEmbeddingLine {
                path: path.display().to_string(),
                line: i + 1,
                reason: format!("invalid float {raw:?}"),
            })?;
            table.data_mut()[id * dim + j] = v;
        }
        filled[id] = true;
    }

    let found = filled.iter().filter(|f| **f).count();
    let covered_vocab = vocab.len().min(cfg.vocab_size);
    Ok((
        table,
        EmbeddingCoverage {
            found,
            missing: covered_vocab - found,
        },
    ))
}
