//! Model parameters and configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::scalar::Scalar;
use super::tensor::Tensor;
use super::NeuralError;
use crate::textpipe::Vocabulary;

/// Attention score form: `dot` is `h_decᵀ enc_t`, `general` inserts a
/// learned bilinear matrix, `h_decᵀ W_a enc_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    Dot,
    General,
}

impl AttentionKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dot" => Some(Self::Dot),
            "general" => Some(Self::General),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dot => "dot",
            Self::General => "general",
        }
    }
}

/// Architecture hyperparameters. The defaults are the full-scale recipe;
/// tests shrink them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub embedding_size: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
    pub attention: AttentionKind,
    /// Whether embeddings keep training after (pretrained) initialization.
    pub finetune_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            hidden_size: 512,
            embedding_size: 300,
            vocab_size: 50_000,
            dropout_rate: 0.2,
            attention: AttentionKind::General,
            finetune_embeddings: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |detail: String| NeuralError::BadConfig { detail };
        if self.num_layers == 0 || self.hidden_size == 0 || self.embedding_size == 0 {
            return Err(bad("layer count and sizes must be positive".into()));
        }
        if self.vocab_size < 5 {
            return Err(bad(format!("vocab_size {} is below 5", self.vocab_size)));
        }
        if self.vocab_size > 50_000 {
            return Err(bad(format!(
                "vocab_size {} exceeds the 50,000 cap",
                self.vocab_size
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(bad(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Handle to one parameter tensor inside a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Parameters of one LSTM layer: the four gates are stacked row-wise in
/// the order input, forget, output, cell (`i`, `f`, `o`, `g`), so each
/// weight has `4·hidden` rows.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
}

/// View of one named parameter and its gradient.
pub struct ParamView<'a, F: Scalar> {
    pub name: &'a str,
    pub value: &'a Tensor<F>,
    pub grad: &'a Tensor<F>,
}

/// All trainable parameters of the encoder-decoder: one shared embedding
/// table, the encoder and decoder LSTM stacks, the attention matrices and
/// the output projection. Every parameter is registered exactly once, so
/// clipping and stepping iterate the full list.
#[derive(Debug, Clone)]
pub struct Model<F: Scalar> {
    cfg: ModelConfig,
    names: Vec<String>,
    values: Vec<Tensor<F>>,
    grads: Vec<Tensor<F>>,
    pub(crate) embedding: ParamId,
    pub(crate) encoder: Vec<LstmParams>,
    pub(crate) decoder: Vec<LstmParams>,
    /// Bilinear attention matrix; present only for `general` scores.
    pub(crate) attn_general: Option<ParamId>,
    /// Combines `[context; h_dec]` into the attentional state.
    pub(crate) w_combine: ParamId,
    pub(crate) w_out: ParamId,
    pub(crate) b_out: ParamId,
}

struct ModelBuilder<F: Scalar> {
    names: Vec<String>,
    values: Vec<Tensor<F>>,
    rng: ChaCha12Rng,
}

impl<F: Scalar> ModelBuilder<F> {
    fn add(&mut self, name: String, shape: &[usize]) -> ParamId {
        // Every entry i.i.d. uniform on [-0.1, 0.1].
        self.values
            .push(Tensor::uniform(shape, -0.1, 0.1, &mut self.rng));
        self.names.push(name);
        ParamId(self.values.len() - 1)
    }

    fn add_lstm(&mut self, prefix: &str, input_size: usize, hidden: usize) -> LstmParams {
        LstmParams {
            w_input: self.add(format!("{prefix}.w_input"), &[4 * hidden, input_size]),
            w_hidden: self.add(format!("{prefix}.w_hidden"), &[4 * hidden, hidden]),
            bias: self.add(format!("{prefix}.bias"), &[4 * hidden, 1]),
        }
    }
}

impl<F: Scalar> Model<F> {
    /// Builds a model with every parameter drawn i.i.d. uniform on
    /// [-0.1, 0.1] from a generator seeded by `seed`. Deterministic for a
    /// fixed seed.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let mut b = ModelBuilder::<F> {
            names: Vec::new(),
            values: Vec::new(),
            rng: ChaCha12Rng::seed_from_u64(seed),
        };
        let (h, e, v) = (cfg.hidden_size, cfg.embedding_size, cfg.vocab_size);

        let embedding = b.add("embedding".into(), &[v, e]);
        let encoder = (0..cfg.num_layers)
            .map(|l| b.add_lstm(&format!("encoder.{l}"), if l == 0 { e } else { h }, h))
            .collect();
        // Input feeding: the first decoder layer sees the embedding
        // concatenated with the previous attentional vector.
        let decoder = (0..cfg.num_layers)
            .map(|l| b.add_lstm(&format!("decoder.{l}"), if l == 0 { e + h } else { h }, h))
            .collect();
        let attn_general = match cfg.attention {
            AttentionKind::General => Some(b.add("attention.w_a".into(), &[h, h])),
            AttentionKind::Dot => None,
        };
        let w_combine = b.add("attention.w_c".into(), &[h, 2 * h]);
        let w_out = b.add("output.weight".into(), &[v, h]);
        let b_out = b.add("output.bias".into(), &[v, 1]);

        let grads = b.values.iter().map(|t| Tensor::zeros(t.shape())).collect();
        Ok(Self {
            cfg,
            names: b.names,
            values: b.values,
            grads,
            embedding,
            encoder,
            decoder,
            attn_general,
            w_combine,
            w_out,
            b_out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_entries(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn param_value(&self, id: ParamId) -> &Tensor<F> {
        &self.values[id.0]
    }

    pub fn param_grad(&self, id: ParamId) -> &Tensor<F> {
        &self.grads[id.0]
    }

    pub fn param_name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn params(&self) -> impl Iterator<Item = ParamView<'_, F>> {
        (0..self.values.len()).map(move |i| ParamView {
            name: &self.names[i],
            value: &self.values[i],
            grad: &self.grads[i],
        })
    }

    /// Mutates one parameter value in place (finite-difference probes and
    /// embedding loading).
    pub fn param_value_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.values[id.0]
    }

    /// Adds a backward pass's gradients into the stored gradients.
    pub fn accumulate_grads(&mut self, grads: super::graph::ParamGrads<F>) {
        for (pid, g) in grads.updates {
            debug_assert_eq!(self.values[pid.0].shape(), g.shape());
            self.grads[pid.0].add_scaled(&g, F::ONE);
        }
    }

    /// Global L2 norm over all gradients (computed in f64).
    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .map(Tensor::sq_sum_f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Scales every gradient in place.
    pub fn scale_grads(&mut self, scale: F) {
        for g in &mut self.grads {
            g.scale_in_place(scale);
        }
    }

    /// `value ← value − lr·grad` over all parameters, then zeroes the
    /// gradients. Frozen embeddings are skipped.
    pub fn sgd_step(&mut self, lr: F) {
        for i in 0..self.values.len() {
            if !self.cfg.finetune_embeddings && i == self.embedding.0 {
                continue;
            }
            let grad = &self.grads[i];
            self.values[i].add_scaled(grad, -lr);
        }
        self.zero_grads();
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(F::ZERO);
        }
    }

    /// Finiteness sweep: errors if any parameter value or gradient is
    /// NaN/Inf.
    pub fn assert_finite(&self) -> Result<(), NeuralError> {
        for i in 0..self.values.len() {
            if !self.values[i].all_finite() {
                return Err(NeuralError::NonFinite {
                    what: format!("parameter {}", self.names[i]),
                });
            }
            if !self.grads[i].all_finite() {
                return Err(NeuralError::NonFinite {
                    what: format!("gradient of {}", self.names[i]),
                });
            }
        }
        Ok(())
    }

    /// Replaces the embedding table (pretrained initialization). The shape
    /// must match `(vocab_size, embedding_size)`.
    pub fn set_embedding_table(&mut self, table: Tensor<F>) -> Result<(), NeuralError> {
        let expected = [self.cfg.vocab_size, self.cfg.embedding_size];
        if table.shape() != expected {
            return Err(NeuralError::ShapeMismatch {
                context: "set_embedding_table".into(),
                detail: format!("expected {:?}, got {:?}", expected, table.shape()),
            });
        }
        self.values[self.embedding.0] = table;
        Ok(())
    }

    pub fn embedding_table(&self) -> &Tensor<F> {
        &self.values[self.embedding.0]
    }

    /// Bit-exact equality of all parameter values (checkpoint tests).
    pub fn values_equal(&self, other: &Model<F>) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.shape() == b.shape() && a.data() == b.data())
    }

    pub(crate) fn raw_parts(&self) -> (&ModelConfig, &[String], &[Tensor<F>]) {
        (&self.cfg, &self.names, &self.values)
    }

    pub(crate) fn from_raw_parts(
        cfg: ModelConfig,
        values: Vec<Tensor<F>>,
    ) -> Result<Self, NeuralError> {
        let mut fresh = Model::init(cfg, 0)?;
        if values.len() != fresh.values.len() {
            return Err(NeuralError::BadCheckpoint {
                detail: format!(
                    "parameter count mismatch: expected {}, found {}",
                    fresh.values.len(),
                    values.len()
                ),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if v.shape() != fresh.values[i].shape() {
                return Err(NeuralError::BadCheckpoint {
                    detail: format!(
                        "parameter {} has shape {:?}, expected {:?}",
                        fresh.names[i],
                        v.shape(),
                        fresh.values[i].shape()
                    ),
                });
            }
        }
        fresh.values = values;
        Ok(fresh)
    }
}

/// Hash binding a checkpoint to the vocabulary it was trained with.
pub fn vocab_hash(v: &Vocabulary) -> u64 {
    v.content_hash()
}
