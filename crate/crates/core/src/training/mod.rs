//! Batch construction and the plain-SGD training recipe: learning rate 1,
//! global gradient-norm clipping at 5, ×0.25 learning-rate decay per epoch
//! after epoch 18, 24 epochs, held-out BLEU after every epoch.
//!
//! The loop is single-threaded with respect to parameter mutation; batch
//! preparation and validation decoding work on immutable snapshots.

mod batch;
mod checkpoint;
mod config;
mod optim;
mod run;

pub use batch::{make_batches, BatchPlan};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_any, save_checkpoint, Checkpoint, LoadedCheckpoint,
};
pub use config::{DecayMode, TrainConfig};
pub use optim::{clip_gradients, learning_rate, sgd_step};
pub use run::{train, train_from, EpochRecord, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: u32, batch: usize },
    #[error("invalid train config: {detail}")]
    BadConfig { detail: String },
    #[error("{path}: line {line}: {reason}")]
    BadConfigFile {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("learning_rate needs epoch ≥ 1, got {epoch}")]
    EpochOutOfRange { epoch: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
