//! Decoding, BLEU scoring and the embellishment-output reports.
//!
//! Scoring and classification are pure functions; batch evaluation merges
//! results deterministically by index.

mod bleu;
mod classify;
mod decode;
mod report;

pub use bleu::{bleu, bleu_with_options, BleuScore};
pub use classify::{
    classify_output, classify_pair_output, is_single_sentence, ClassifyConfig, OutputClass,
    PairClass,
};
pub use decode::{
    beam_search, embellish, greedy_decode, greedy_decode_corpus, replace_unks_from_source,
    DecodeConfig, DecodeMode, DecodedSequence, EncodedValues, ModelScorer, SequenceScorer,
    UnkPolicy,
};
pub use report::{report, EmbellishmentReport, Exemplar, ReportInput};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("hypothesis and reference counts differ: {hyps} vs {refs}")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("evaluation corpus is empty")]
    EmptyCorpus,
    #[error("max_n must be ≥ 1")]
    BadMaxN,
    #[error("invalid decode config: {detail}")]
    BadConfig { detail: String },
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error(transparent)]
    Text(#[from] crate::textpipe::TextError),
}
