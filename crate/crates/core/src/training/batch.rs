//! Deterministic batch construction: truncation, epoch-seeded shuffling and
//! length bucketing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{TrainConfig, TrainError};
use crate::corpus::ParallelCorpus;
use crate::neural::PaddedBatch;
use crate::textpipe::{encode, Vocabulary};

/// The batches of one epoch plus bookkeeping.
#[derive(Debug)]
pub struct BatchPlan {
    pub batches: Vec<PaddedBatch>,
    /// Pairs whose source or target side was cut to the length limit.
    pub truncated_pairs: usize,
}

impl BatchPlan {
    pub fn total_pairs(&self) -> usize {
        self.batches.iter().map(PaddedBatch::len).sum()
    }
}

/// Builds the batches of one epoch: sentences beyond the configured length
/// limits are truncated (and counted), the ordering is shuffled under
/// `epoch_seed`, then stable-sorted by source length so batches pad as
/// little as possible, and finally the batch order is shuffled again.
/// Every corpus pair appears in exactly one batch.
pub fn make_batches(
    c: &ParallelCorpus,
    v: &Vocabulary,
    cfg: &TrainConfig,
    epoch_seed: u64,
) -> Result<BatchPlan, TrainError> {
    if c.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut truncated_pairs = 0usize;
    let encoded: Vec<(Vec<u32>, Vec<u32>)> = c
        .pairs()
        .map(|(src, tgt)| {
            let (src_cut, src_trunc) = src.truncated(cfg.max_source_length);
            let (tgt_cut, tgt_trunc) = tgt.truncated(cfg.max_target_length);
            if src_trunc || tgt_trunc {
                truncated_pairs += 1;
            }
            (encode(&src_cut, v), encode(&tgt_cut, v))
        })
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(epoch_seed);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    order.shuffle(&mut rng);
    // Stable sort keeps the shuffled order within each length class.
    order.sort_by_key(|&i| encoded[i].0.len());

    let mut batches: Vec<PaddedBatch> = order
        .chunks(cfg.batch_size)
        .map(|chunk| {
            let pairs: Vec<(Vec<u32>, Vec<u32>)> =
                chunk.iter().map(|&i| encoded[i].clone()).collect();
            PaddedBatch::from_pairs(&pairs)
        })
        .collect();
    batches.shuffle(&mut rng);

    Ok(BatchPlan {
        batches,
        truncated_pairs,
    })
}
