//! Core library of the `ornate` toolkit: rewriting "simple English" into
//! lexically and syntactically richer English with an LSTM encoder-decoder.
//!
//! The pipeline is organised in five layers:
//!
//! * [`textpipe`] — deterministic text preprocessing: tokenization,
//!   named-entity anonymization, sentence pairing, vocabulary building and
//!   integer encoding.
//! * [`corpus`] — parallel corpora and the hierarchical story corpus
//!   (system → story → paragraph → sentence), loading, splitting and
//!   validation.
//! * [`neural`] — tensors with reverse-mode differentiation, the stacked
//!   LSTM encoder, the attentional decoder and checkpointing.
//! * [`training`] — batching and the plain-SGD training recipe (gradient
//!   clipping, stepwise learning-rate decay, per-epoch validation).
//! * [`eval`] — greedy/beam decoding, corpus BLEU and the output
//!   classification reports.

pub mod corpus;
pub mod eval;
pub mod neural;
pub mod textpipe;
pub mod training;

pub use corpus::{CctCorpus, DatasetSplit, ParallelCorpus};
pub use eval::{BleuScore, DecodeConfig, EmbellishmentReport, OutputClass, PairClass};
pub use neural::{Model, ModelConfig, Scalar, Tensor};
pub use textpipe::{EntityMap, Sentence, Vocabulary};
pub use training::{TrainConfig, TrainReport};
