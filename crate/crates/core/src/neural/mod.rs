//! Numeric core: tensors, reverse-mode differentiation, the LSTM
//! encoder-decoder with attention, and checkpointing.
//!
//! Model parameters have a single-writer contract during training; any
//! number of readers may run inference on an immutable model concurrently.
//! All random number generators are explicit and seeded.

mod embeddings;
mod graph;
mod model;
mod scalar;
mod seq2seq;
mod tensor;

pub use embeddings::{load_pretrained_embeddings, EmbeddingCoverage};
pub use graph::{DropoutSampler, Graph, NodeId, ParamGrads};
pub use model::{vocab_hash, AttentionKind, LstmParams, Model, ModelConfig, ParamId, ParamView};
pub use scalar::{sigmoid, Scalar};
pub use seq2seq::{
    attention, decoder_step, encode_batch, encode_sequence, forward_loss, forward_loss_batch,
    lstm_cell, AttentionOutput, DecoderState, EncoderOutput, PaddedBatch, PaddedIds,
};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {context}: {detail}")]
    ShapeMismatch { context: String, detail: String },
    #[error("invalid model config: {detail}")]
    BadConfig { detail: String },
    #[error("id {id} out of vocabulary range {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("backward called twice without a new forward pass")]
    BackwardWithoutForward,
    #[error("non-finite value detected in {what}")]
    NonFinite { what: String },
    #[error("{path}: line {line}: {reason}")]
    BadEmbeddingLine {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("invalid checkpoint: {detail}")]
    BadCheckpoint { detail: String },
    #[error("checkpoint vocabulary hash {found:#018x} does not match the provided vocabulary ({expected:#018x})")]
    VocabHashMismatch { expected: u64, found: u64 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mixes a base seed with stream and index labels; used to derive all
/// per-epoch and per-batch randomness from the single run seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 over the combined words
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
