//! Parallel corpora and the hierarchical story corpus.
//!
//! Loaders are single-threaded per file; loaded corpora are immutable and
//! freely shareable across workers.

mod cct;
mod parallel;

pub use cct::{
    assemble_from_dir, format_cct, load_cct, make_pair_units, split_cct, validate_manifest,
    CctCorpus, CctCounts, CctManifest, CctParagraph, CctStory, CctSystem, CctUnit, Granularity,
};
pub use parallel::{load_parallel, save_parallel, split_dataset, DatasetSplit, ParallelCorpus};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(
        "aligned files differ in length: {src_lines} vs {tgt_lines} ({src_path} / {tgt_path})"
    )]
    AlignmentMismatch {
        src_path: String,
        tgt_path: String,
        src_lines: usize,
        tgt_lines: usize,
    },
    #[error("{path}: line {line} is empty")]
    EmptyLine { path: String, line: usize },
    #[error("{path}: line {line}: {reason}")]
    BadMarker {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("corpus of size {size} is too small to split (minimum 3)")]
    TooSmallToSplit { size: usize },
    #[error("split fractions {fractions:?} must be positive and sum to 1")]
    BadFractions { fractions: (f64, f64, f64) },
    #[error("manifest mismatch for {field}: expected {expected}, found {found}")]
    ManifestMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{path}: line {line}: {reason}")]
    BadManifest {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
