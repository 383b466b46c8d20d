//! The epoch loop: batches → forward → backward → clip → step, with
//! held-out greedy BLEU and a checkpoint after every epoch.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use super::batch::make_batches;
use super::checkpoint::save_checkpoint;
use super::optim::{clip_gradients, learning_rate};
use super::{TrainConfig, TrainError};
use crate::corpus::DatasetSplit;
use crate::eval::{bleu, greedy_decode_corpus};
use crate::neural::{
    derive_seed, forward_loss_batch, vocab_hash, DropoutSampler, Graph, Model, Scalar,
};
use crate::textpipe::{decode_ids, encode, Vocabulary};

/// One completed epoch.
#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub valid_bleu: f64,
    pub seconds: f64,
}

/// Per-epoch history of a training run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub truncated_pairs: usize,
}

impl TrainReport {
    /// Tab-separated log: epoch, lr, train_loss, valid_bleu.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\tlr\ttrain_loss\tvalid_bleu\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.2}\n",
                e.epoch, e.learning_rate, e.train_loss, e.valid_bleu
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Trains for the configured number of epochs, starting from epoch 1.
pub fn train<F: Scalar>(
    model: Model<F>,
    vocab: &Vocabulary,
    data: &DatasetSplit,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<(Model<F>, TrainReport), TrainError> {
    train_from(model, vocab, data, cfg, out_dir, 1)
}

/// Resumes (or starts) training at `first_epoch`, running through
/// `cfg.epochs`. All per-epoch randomness is derived from `cfg.seed` and
/// the epoch number, so a resumed run reproduces an uninterrupted one
/// exactly.
pub fn train_from<F: Scalar>(
    mut model: Model<F>,
    vocab: &Vocabulary,
    data: &DatasetSplit,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    first_epoch: u32,
) -> Result<(Model<F>, TrainReport), TrainError> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| TrainError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }

    let vhash = vocab_hash(vocab);
    let valid_sources: Vec<Vec<u32>> = data
        .valid
        .source()
        .iter()
        .map(|s| encode(&s.truncated(cfg.max_source_length).0, vocab))
        .collect();

    let mut report = TrainReport::default();
    for epoch in first_epoch..=cfg.epochs {
        let started = Instant::now();
        let lr = learning_rate(epoch, cfg)?;
        let plan = make_batches(
            &data.train,
            vocab,
            cfg,
            derive_seed(cfg.seed, 1, epoch as u64),
        )?;
        report.truncated_pairs = plan.truncated_pairs;

        let dropout_rate = model.config().dropout_rate;
        let mut loss_sum = 0.0f64;
        let mut token_sum = 0usize;
        for (bi, batch) in plan.batches.iter().enumerate() {
            let mut sampler = (dropout_rate > 0.0).then(|| {
                DropoutSampler::new(
                    dropout_rate,
                    ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, 2 + epoch as u64, bi as u64)),
                )
            });
            let mut g = Graph::attached(&model);
            let fwd = forward_loss_batch(&mut g, &model, batch, sampler.as_mut())?;
            let loss = g.value(fwd.loss).item().to_f64();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: bi });
            }
            loss_sum += loss * fwd.target_tokens as f64;
            token_sum += fwd.target_tokens;
            let grads = g.backward(fwd.loss)?;
            drop(g);
            model.accumulate_grads(grads);
            clip_gradients(&mut model, cfg.clip_norm);
            model.sgd_step(F::from_f64(lr));
        }
        let train_loss = loss_sum / token_sum.max(1) as f64;

        let valid_bleu = if data.valid.is_empty() {
            0.0
        } else {
            let decoded = greedy_decode_corpus(
                &model,
                &valid_sources,
                cfg.max_target_length,
                cfg.batch_size,
            )?;
            let hyps = decoded
                .iter()
                .map(|d| decode_ids(d.surface_ids(), vocab))
                .collect::<Result<Vec<_>, _>>()
                .map_err(crate::eval::EvalError::from)?;
            bleu(&hyps, data.valid.target(), 4)
                .map(|b| b.score)
                .unwrap_or(0.0)
        };

        // a finiteness sweep after every epoch of steps
        model.assert_finite()?;

        if let Some(dir) = out_dir {
            let path = dir.join(format!("epoch-{epoch:04}.ckpt"));
            save_checkpoint(&model, cfg, vhash, epoch, &path)?;
        }

        report.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss,
            valid_bleu,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, report))
}
