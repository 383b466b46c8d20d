//! The optimization primitives: learning-rate schedule, global-norm
//! gradient clipping, plain SGD.

use super::{TrainConfig, TrainError};
use crate::neural::{Model, Scalar};
use crate::training::DecayMode;

/// Learning rate for a 1-based epoch: `lr0` up to and including
/// `decay_after_epoch`, then decayed per [`DecayMode`].
pub fn learning_rate(epoch: u32, cfg: &TrainConfig) -> Result<f64, TrainError> {
    if epoch < 1 {
        return Err(TrainError::EpochOutOfRange { epoch });
    }
    if epoch <= cfg.decay_after_epoch {
        return Ok(cfg.lr0);
    }
    Ok(match cfg.decay_mode {
        DecayMode::Compound => {
            cfg.lr0
                * cfg
                    .decay_factor
                    .powi((epoch - cfg.decay_after_epoch) as i32)
        }
        DecayMode::Constant => cfg.lr0 * cfg.decay_factor,
    })
}

/// Rescales all gradients so the global L2 norm does not exceed
/// `max_norm`; the direction is preserved. Returns the applied scale
/// (1.0 when the norm was already within bounds).
pub fn clip_gradients<F: Scalar>(model: &mut Model<F>, max_norm: f64) -> f64 {
    let norm = model.grad_norm();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        model.scale_grads(F::from_f64(scale));
        scale
    } else {
        1.0
    }
}

/// One plain gradient-descent step over every parameter; gradients are
/// zeroed afterwards.
pub fn sgd_step<F: Scalar>(model: &mut Model<F>, lr: f64) {
    model.sgd_step(F::from_f64(lr));
}
