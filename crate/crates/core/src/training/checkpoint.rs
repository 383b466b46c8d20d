//! Versioned binary checkpoints: model config, train config, vocabulary
//! hash and every parameter tensor. Files are written to a temporary name
//! and renamed into place so readers never observe a partial checkpoint.

use std::io::Write;
use std::path::Path;

use super::{DecayMode, TrainConfig};
use crate::neural::Tensor;
use crate::neural::{AttentionKind, Model, ModelConfig, NeuralError, Scalar};

const MAGIC: &[u8; 8] = b"ORNTCKPT";
const VERSION: u16 = 1;

/// A loaded checkpoint: the model plus the training state needed to resume.
#[derive(Debug)]
pub struct Checkpoint<F: Scalar> {
    pub model: Model<F>,
    pub train_config: TrainConfig,
    pub vocab_hash: u64,
    pub completed_epochs: u32,
}

impl<F: Scalar> Checkpoint<F> {
    /// Refuses checkpoints whose vocabulary hash differs from the one the
    /// caller is about to use.
    pub fn verify_vocab_hash(&self, expected: u64) -> Result<(), NeuralError> {
        if self.vocab_hash != expected {
            return Err(NeuralError::VocabHashMismatch {
                expected,
                found: self.vocab_hash,
            });
        }
        Ok(())
    }
}

/// Checkpoint of either precision, resolved from the file header.
#[derive(Debug)]
pub enum LoadedCheckpoint {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        if self.pos + n > self.buf.len() {
            return Err(NeuralError::BadCheckpoint {
                detail: format!("{}: truncated at byte {}", self.path.display(), self.pos),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, NeuralError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, NeuralError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}
fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}
fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}
fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serializes and atomically writes a checkpoint.
pub fn save_checkpoint<F: Scalar>(
    model: &Model<F>,
    train_config: &TrainConfig,
    vocab_hash: u64,
    completed_epochs: u32,
    path: &Path,
) -> Result<(), NeuralError> {
    let (cfg, names, values) = model.raw_parts();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u16(&mut out, VERSION);
    out.push(F::DTYPE_BYTES);

    push_u32(&mut out, cfg.num_layers as u32);
    push_u32(&mut out, cfg.hidden_size as u32);
    push_u32(&mut out, cfg.embedding_size as u32);
    push_u32(&mut out, cfg.vocab_size as u32);
    push_f64(&mut out, cfg.dropout_rate);
    out.push(match cfg.attention {
        AttentionKind::Dot => 0,
        AttentionKind::General => 1,
    });
    out.push(cfg.finetune_embeddings as u8);

    push_u64(&mut out, vocab_hash);
    push_u32(&mut out, completed_epochs);

    push_u32(&mut out, train_config.epochs);
    push_f64(&mut out, train_config.lr0);
    push_f64(&mut out, train_config.clip_norm);
    push_f64(&mut out, train_config.decay_factor);
    push_u32(&mut out, train_config.decay_after_epoch);
    out.push(match train_config.decay_mode {
        DecayMode::Compound => 0,
        DecayMode::Constant => 1,
    });
    push_u32(&mut out, train_config.batch_size as u32);
    push_u64(&mut out, train_config.seed);
    push_u32(&mut out, train_config.max_source_length as u32);
    push_u32(&mut out, train_config.max_target_length as u32);

    push_u32(&mut out, values.len() as u32);
    for (name, tensor) in names.iter().zip(values) {
        push_u16(&mut out, name.len() as u16);
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            push_u32(&mut out, d as u32);
        }
        for &v in tensor.data() {
            v.write_le(&mut out);
        }
    }

    let io = |source| NeuralError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = std::fs::File::create(&tmp).map_err(|source| NeuralError::Io {
            path: tmp.display().to_string(),
            source,
        })?;
        f.write_all(&out).map_err(|source| NeuralError::Io {
            path: tmp.display().to_string(),
            source,
        })?;
        f.sync_all().ok();
    }
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

fn read_header(r: &mut Reader<'_>) -> Result<u8, NeuralError> {
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(NeuralError::BadCheckpoint {
            detail: "bad magic bytes".into(),
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(NeuralError::BadCheckpoint {
            detail: format!("unsupported version {version}"),
        });
    }
    r.u8()
}

fn read_body<F: Scalar>(r: &mut Reader<'_>) -> Result<Checkpoint<F>, NeuralError> {
    let num_layers = r.u32()? as usize;
    let hidden_size = r.u32()? as usize;
    let embedding_size = r.u32()? as usize;
    let vocab_size = r.u32()? as usize;
    let dropout_rate = r.f64()?;
    let attention = match r.u8()? {
        0 => AttentionKind::Dot,
        1 => AttentionKind::General,
        other => {
            return Err(NeuralError::BadCheckpoint {
                detail: format!("bad attention tag {other}"),
            })
        }
    };
    let finetune_embeddings = r.u8()? != 0;
    let cfg = ModelConfig {
        num_layers,
        hidden_size,
        embedding_size,
        vocab_size,
        dropout_rate,
        attention,
        finetune_embeddings,
    };

    let vocab_hash = r.u64()?;
    let completed_epochs = r.u32()?;

    let train_config = TrainConfig {
        epochs: r.u32()?,
        lr0: r.f64()?,
        clip_norm: r.f64()?,
        decay_factor: r.f64()?,
        decay_after_epoch: r.u32()?,
        decay_mode: match r.u8()? {
            0 => DecayMode::Compound,
            1 => DecayMode::Constant,
            other => {
                return Err(NeuralError::BadCheckpoint {
                    detail: format!("bad decay mode tag {other}"),
                })
            }
        },
        batch_size: r.u32()? as usize,
        seed: r.u64()?,
        max_source_length: r.u32()? as usize,
        max_target_length: r.u32()? as usize,
    };

    let count = r.u32()? as usize;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let _name = r.take(name_len)?;
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let bytes = r.take(n * F::DTYPE_BYTES as usize)?;
        let data: Vec<F> = bytes
            .chunks_exact(F::DTYPE_BYTES as usize)
            .map(F::read_le)
            .collect();
        values.push(Tensor::from_vec(&shape, data)?);
    }
    if r.pos != r.buf.len() {
        return Err(NeuralError::BadCheckpoint {
            detail: format!("{} trailing bytes", r.buf.len() - r.pos),
        });
    }

    let model = Model::from_raw_parts(cfg, values)?;
    Ok(Checkpoint {
        model,
        train_config,
        vocab_hash,
        completed_epochs,
    })
}

/// Loads a checkpoint of a known precision; errors if the file was written
/// at the other precision.
pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<Checkpoint<F>, NeuralError> {
    let buf = std::fs::read(path).map_err(|source| NeuralError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        path,
    };
    let dtype = read_header(&mut r)?;
    if dtype != F::DTYPE_BYTES {
        return Err(NeuralError::BadCheckpoint {
            detail: format!(
                "precision mismatch: file holds {}-byte floats, caller wants {}-byte",
                dtype,
                F::DTYPE_BYTES
            ),
        });
    }
    read_body(&mut r)
}

/// Loads a checkpoint at whichever precision the file declares.
pub fn load_checkpoint_any(path: &Path) -> Result<LoadedCheckpoint, NeuralError> {
    let buf = std::fs::read(path).map_err(|source| NeuralError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        path,
    };
    match read_header(&mut r)? {
        4 => Ok(LoadedCheckpoint::F32(read_body(&mut r)?)),
        8 => Ok(LoadedCheckpoint::F64(read_body(&mut r)?)),
        other => Err(NeuralError::BadCheckpoint {
            detail: format!("bad dtype tag {other}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(seed: u64) -> Model<f32> {
        Model::init(
            ModelConfig {
                num_layers: 2,
                hidden_size: 6,
                embedding_size: 5,
                vocab_size: 11,
                dropout_rate: 0.1,
                ..ModelConfig::default()
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = tiny_model(42);
        let cfg = TrainConfig::default();
        save_checkpoint(&model, &cfg, 0xDEAD_BEEF, 7, &path).unwrap();
        let loaded = load_checkpoint::<f32>(&path).unwrap();
        assert!(loaded.model.values_equal(&model));
        assert_eq!(loaded.train_config, cfg);
        assert_eq!(loaded.vocab_hash, 0xDEAD_BEEF);
        assert_eq!(loaded.completed_epochs, 7);
    }

    #[test]
    fn f64_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m64.ckpt");
        let model = Model::<f64>::init(
            ModelConfig {
                num_layers: 1,
                hidden_size: 3,
                embedding_size: 3,
                vocab_size: 9,
                dropout_rate: 0.0,
                ..ModelConfig::default()
            },
            3,
        )
        .unwrap();
        save_checkpoint(&model, &TrainConfig::default(), 1, 0, &path).unwrap();
        let loaded = load_checkpoint::<f64>(&path).unwrap();
        assert!(loaded.model.values_equal(&model));
        // wrong-precision load is refused
        assert!(load_checkpoint::<f32>(&path).is_err());
        // dynamic load resolves the precision
        assert!(matches!(
            load_checkpoint_any(&path),
            Ok(LoadedCheckpoint::F64(_))
        ));
    }

    #[test]
    fn vocab_hash_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&tiny_model(1), &TrainConfig::default(), 111, 0, &path).unwrap();
        let loaded = load_checkpoint::<f32>(&path).unwrap();
        assert!(loaded.verify_vocab_hash(111).is_ok());
        assert!(matches!(
            loaded.verify_vocab_hash(222),
            Err(NeuralError::VocabHashMismatch {
                expected: 222,
                found: 111
            })
        ));
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&tiny_model(1), &TrainConfig::default(), 1, 0, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 10);
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_checkpoint::<f32>(&path).is_err());

        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(load_checkpoint::<f32>(&path).is_err());
    }

    #[test]
    fn no_tmp_file_left_behind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&tiny_model(1), &TrainConfig::default(), 1, 0, &path).unwrap();
        let entries: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(entries, ["m.ckpt"]);
    }
}
