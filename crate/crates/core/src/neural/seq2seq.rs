//! The encoder-decoder network as graph compositions: stacked LSTM encoder,
//! attentional decoder with input feeding, and the teacher-forced loss.

use super::graph::{DropoutSampler, Graph, NodeId};
use super::model::{LstmParams, Model};
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::NeuralError;
use crate::textpipe::vocab::PAD_ID;

/// Step-major padded id matrix: `ids[t·batch + b]` is the id of sequence
/// `b` at step `t`, PAD-filled past each sequence's true length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedIds {
    ids: Vec<u32>,
    steps: usize,
    batch: usize,
    lengths: Vec<usize>,
}

impl PaddedIds {
    pub fn from_sequences(seqs: &[Vec<u32>]) -> Self {
        let batch = seqs.len();
        let steps = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let mut ids = vec![PAD_ID; steps * batch];
        for (b, seq) in seqs.iter().enumerate() {
            for (t, &id) in seq.iter().enumerate() {
                ids[t * batch + b] = id;
            }
        }
        Self {
            ids,
            steps,
            batch,
            lengths: seqs.iter().map(Vec::len).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn step(&self, t: usize) -> &[u32] {
        &self.ids[t * self.batch..(t + 1) * self.batch]
    }

    pub fn sequence(&self, b: usize) -> Vec<u32> {
        (0..self.lengths[b])
            .map(|t| self.ids[t * self.batch + b])
            .collect()
    }

    fn check_range(&self, vocab_size: usize) -> Result<(), NeuralError> {
        match self.ids.iter().find(|&&id| id as usize >= vocab_size) {
            Some(&id) => Err(NeuralError::IdOutOfRange { id, vocab_size }),
            None => Ok(()),
        }
    }
}

/// One aligned batch: encoded source and target sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedBatch {
    pub src: PaddedIds,
    pub tgt: PaddedIds,
}

impl PaddedBatch {
    pub fn from_pairs(pairs: &[(Vec<u32>, Vec<u32>)]) -> Self {
        let src: Vec<Vec<u32>> = pairs.iter().map(|(s, _)| s.clone()).collect();
        let tgt: Vec<Vec<u32>> = pairs.iter().map(|(_, t)| t.clone()).collect();
        Self {
            src: PaddedIds::from_sequences(&src),
            tgt: PaddedIds::from_sequences(&tgt),
        }
    }

    pub fn len(&self) -> usize {
        self.src.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.src.batch() == 0
    }

    /// Number of real (unpadded) prediction targets.
    pub fn target_tokens(&self) -> usize {
        self.tgt.lengths().iter().map(|l| l.saturating_sub(1)).sum()
    }
}

/// One LSTM cell step:
/// `i = σ(W_i x + U_i h + b_i)`, `f = σ(W_f x + U_f h + b_f)`,
/// `o = σ(W_o x + U_o h + b_o)`, `g = tanh(W_g x + U_g h + b_g)`,
/// `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
///
/// The four gates are stacked row-wise (i, f, o, g) in `w_input`,
/// `w_hidden` and `bias`, so `W_i` is rows `0..H` of `w_input` and so on.
pub fn lstm_cell<F: Scalar>(
    g: &mut Graph<'_, F>,
    w_input: NodeId,
    w_hidden: NodeId,
    bias: NodeId,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId), NeuralError> {
    let (wi, wh, vb) = (g.value(w_input), g.value(w_hidden), g.value(bias));
    let (vx, vh, vc) = (g.value(x), g.value(h), g.value(c));
    let rows = wi.rows();
    let mismatch = |detail: String| NeuralError::ShapeMismatch {
        context: "lstm_cell".into(),
        detail,
    };
    if rows % 4 != 0 {
        return Err(mismatch(format!("gate weights need 4·H rows, got {rows}")));
    }
    let hidden = rows / 4;
    if wh.shape() != [rows, hidden] || vb.shape() != [rows, 1] {
        return Err(mismatch(format!(
            "w_hidden {:?} / bias {:?} inconsistent with 4H={rows}",
            wh.shape(),
            vb.shape()
        )));
    }
    if vx.rows() != wi.cols() || vh.shape() != [hidden, vx.cols()] || vc.shape() != vh.shape() {
        return Err(mismatch(format!(
            "x {:?}, h {:?}, c {:?} inconsistent with weights ({:?})",
            vx.shape(),
            vh.shape(),
            vc.shape(),
            wi.shape()
        )));
    }

    let wx = g.matmul(w_input, x);
    let uh = g.matmul(w_hidden, h);
    let sum = g.add(wx, uh);
    let pre = g.add_bias(sum, bias);
    let i_gate = g.slice_rows(pre, 0, hidden);
    let f_gate = g.slice_rows(pre, hidden, hidden);
    let o_gate = g.slice_rows(pre, 2 * hidden, hidden);
    let g_gate = g.slice_rows(pre, 3 * hidden, hidden);
    let i = g.sigmoid(i_gate);
    let f = g.sigmoid(f_gate);
    let o = g.sigmoid(o_gate);
    let cand = g.tanh(g_gate);
    let fc = g.mul(f, c);
    let ig = g.mul(i, cand);
    let c_next = g.add(fc, ig);
    let c_act = g.tanh(c_next);
    let h_next = g.mul(o, c_act);
    Ok((h_next, c_next))
}

/// Encoder output: per-step top-layer states plus everything the decoder
/// needs (packed states, attention mask, per-layer final states).
pub struct EncoderOutput {
    /// Top-layer hidden state per source step, each (H×B).
    pub top_states: Vec<NodeId>,
    /// Raw top states packed as (T,H,B); attended over for the context.
    pub raw_pack: NodeId,
    /// Score-side pack: `W_a`-projected states for `general`, raw for `dot`.
    pub proj_pack: NodeId,
    /// Additive attention mask (T×B): 0 on real positions, -1e9 on padding.
    pub mask: NodeId,
    /// Final (h, c) per layer, gathered at each sequence's true last step.
    pub final_states: Vec<(NodeId, NodeId)>,
}

/// Runs the stacked encoder over a padded batch. Dropout (when a sampler is
/// given) applies to the embedded inputs and between layers, never on the
/// recurrent connections.
pub fn encode_batch<'m, F: Scalar>(
    g: &mut Graph<'m, F>,
    model: &'m Model<F>,
    src: &PaddedIds,
    dropout: Option<&mut DropoutSampler>,
) -> Result<EncoderOutput, NeuralError> {
    let cfg = model.config();
    if src.batch() == 0 || src.steps() == 0 {
        return Err(NeuralError::ShapeMismatch {
            context: "encode_batch".into(),
            detail: "empty source batch".into(),
        });
    }
    if src.lengths().contains(&0) {
        return Err(NeuralError::ShapeMismatch {
            context: "encode_batch".into(),
            detail: "source sequences must be non-empty".into(),
        });
    }
    src.check_range(cfg.vocab_size)?;

    let (hidden, batch, steps) = (cfg.hidden_size, src.batch(), src.steps());
    let embedding = g.param(model.embedding);
    let layer_params: Vec<LstmParams> = model.encoder.clone();
    let mut dropout = dropout;

    // Per-layer running (h, c) and the per-step history needed for the
    // final-state gather.
    let zero = g.leaf(Tensor::zeros(&[hidden, batch]));
    let mut state: Vec<(NodeId, NodeId)> = vec![(zero, zero); layer_params.len()];
    let mut history: Vec<Vec<(NodeId, NodeId)>> = vec![Vec::new(); layer_params.len()];
    let mut top_states = Vec::with_capacity(steps);

    for t in 0..steps {
        let mut x = g.embed_lookup(embedding, src.step(t));
        if let Some(s) = dropout.as_deref_mut() {
            x = g.dropout(x, s);
        }
        for (l, params) in layer_params.iter().enumerate() {
            if l > 0 {
                if let Some(s) = dropout.as_deref_mut() {
                    x = g.dropout(x, s);
                }
            }
            let w_input = g.param(params.w_input);
            let w_hidden = g.param(params.w_hidden);
            let bias = g.param(params.bias);
            let (h, c) = lstm_cell(g, w_input, w_hidden, bias, x, state[l].0, state[l].1)?;
            state[l] = (h, c);
            history[l].push((h, c));
            x = h;
        }
        top_states.push(x);
    }

    // Gather each sequence's state at its own last real step.
    let last_step: Vec<usize> = src.lengths().iter().map(|&l| l - 1).collect();
    let final_states = history
        .iter()
        .map(|steps| {
            let hs: Vec<NodeId> = steps.iter().map(|(h, _)| *h).collect();
            let cs: Vec<NodeId> = steps.iter().map(|(_, c)| *c).collect();
            (
                g.time_gather_cols(&hs, &last_step),
                g.time_gather_cols(&cs, &last_step),
            )
        })
        .collect();

    let raw_pack = g.pack_steps(&top_states);
    let proj_pack = match model.attn_general {
        Some(w_a) => {
            let w_a = g.param(w_a);
            let projected: Vec<NodeId> = top_states.iter().map(|&s| g.matmul(w_a, s)).collect();
            g.pack_steps(&projected)
        }
        None => raw_pack,
    };

    let mut mask = Tensor::zeros(&[steps, batch]);
    for (b, &len) in src.lengths().iter().enumerate() {
        for t in len..steps {
            *mask.at2_mut(t, b) = F::from_f64(-1e9);
        }
    }
    let mask = g.leaf(mask);

    Ok(EncoderOutput {
        top_states,
        raw_pack,
        proj_pack,
        mask,
        final_states,
    })
}

/// Convenience wrapper over a single sequence: returns the top-layer
/// encoder states as a (T × hidden) tensor.
pub fn encode_sequence<F: Scalar>(
    model: &Model<F>,
    ids: &[u32],
    mut dropout: Option<&mut DropoutSampler>,
) -> Result<Tensor<F>, NeuralError> {
    let mut g = Graph::attached(model);
    let src = PaddedIds::from_sequences(&[ids.to_vec()]);
    let enc = encode_batch(&mut g, model, &src, dropout.take())?;
    let hidden = model.config().hidden_size;
    let mut out = Tensor::zeros(&[enc.top_states.len(), hidden]);
    for (t, &s) in enc.top_states.iter().enumerate() {
        let v = g.value(s);
        for i in 0..hidden {
            *out.at2_mut(t, i) = v.at2(i, 0);
        }
    }
    Ok(out)
}

/// Result of one attention application.
pub struct AttentionOutput {
    pub context: NodeId,
    pub weights: NodeId,
    pub h_att: NodeId,
}

/// Luong attention over packed encoder states:
/// `score_t = h_decᵀ·proj_t`, `weights = softmax(scores + mask)`,
/// `context = Σ weights_t · enc_t`, `h_att = tanh(W_c [context; h_dec])`.
pub fn attention<F: Scalar>(
    g: &mut Graph<'_, F>,
    w_combine: NodeId,
    h_dec: NodeId,
    raw_pack: NodeId,
    proj_pack: NodeId,
    mask: Option<NodeId>,
) -> AttentionOutput {
    let scores = g.attn_scores(proj_pack, h_dec);
    let masked = match mask {
        Some(m) => g.add(scores, m),
        None => scores,
    };
    let weights = g.softmax_cols(masked);
    let context = g.attn_context(raw_pack, weights);
    let cat = g.concat_rows(context, h_dec);
    let combined = g.matmul(w_combine, cat);
    let h_att = g.tanh(combined);
    AttentionOutput {
        context,
        weights,
        h_att,
    }
}

/// Decoder recurrent state: per-layer (h, c) plus the previous attentional
/// vector for input feeding.
pub struct DecoderState {
    pub layers: Vec<(NodeId, NodeId)>,
    pub attn_vec: NodeId,
}

impl DecoderState {
    /// Initial state: the encoder's final (h, c) per layer and a zero
    /// attentional vector.
    pub fn from_encoder<F: Scalar>(
        g: &mut Graph<'_, F>,
        enc: &EncoderOutput,
        hidden: usize,
        batch: usize,
    ) -> Self {
        let attn_vec = g.leaf(Tensor::zeros(&[hidden, batch]));
        Self {
            layers: enc.final_states.clone(),
            attn_vec,
        }
    }
}

/// One decoder step: embeds the previous ids, concatenates the previous
/// attentional vector (input feeding), runs the LSTM stack, applies
/// attention and projects to vocabulary logits.
pub fn decoder_step<'m, F: Scalar>(
    g: &mut Graph<'m, F>,
    model: &'m Model<F>,
    prev_ids: &[u32],
    state: &DecoderState,
    enc: &EncoderOutput,
    mut dropout: Option<&mut DropoutSampler>,
) -> Result<(NodeId, DecoderState, AttentionOutput), NeuralError> {
    let cfg = model.config();
    if let Some(&id) = prev_ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(NeuralError::IdOutOfRange {
            id,
            vocab_size: cfg.vocab_size,
        });
    }
    if state.layers.len() != cfg.num_layers {
        return Err(NeuralError::ShapeMismatch {
            context: "decoder_step".into(),
            detail: format!(
                "state has {} layers, config wants {}",
                state.layers.len(),
                cfg.num_layers
            ),
        });
    }

    let embedding = g.param(model.embedding);
    let mut x = g.embed_lookup(embedding, prev_ids);
    if let Some(s) = dropout.as_deref_mut() {
        x = g.dropout(x, s);
    }
    x = g.concat_rows(x, state.attn_vec);

    let mut layers = Vec::with_capacity(cfg.num_layers);
    for (l, params) in model.decoder.iter().enumerate() {
        if l > 0 {
            if let Some(s) = dropout.as_deref_mut() {
                x = g.dropout(x, s);
            }
        }
        let w_input = g.param(params.w_input);
        let w_hidden = g.param(params.w_hidden);
        let bias = g.param(params.bias);
        let (h, c) = lstm_cell(
            g,
            w_input,
            w_hidden,
            bias,
            x,
            state.layers[l].0,
            state.layers[l].1,
        )?;
        layers.push((h, c));
        x = h;
    }

    let w_combine = g.param(model.w_combine);
    let attn = attention(g, w_combine, x, enc.raw_pack, enc.proj_pack, Some(enc.mask));
    let w_out = g.param(model.w_out);
    let b_out = g.param(model.b_out);
    let proj = g.matmul(w_out, attn.h_att);
    let logits = g.add_bias(proj, b_out);

    let next = DecoderState {
        layers,
        attn_vec: attn.h_att,
    };
    Ok((logits, next, attn))
}

/// Teacher-forced batch loss plus the per-step logits (used for accuracy
/// probes during evaluation).
pub struct BatchForward {
    pub loss: NodeId,
    pub step_logits: Vec<NodeId>,
    pub target_tokens: usize,
}

/// Teacher forcing over the target batch: the decoder consumes gold token
/// `t` and is scored on gold token `t+1`. The loss is the mean negative
/// log-probability over all real target positions; padding is masked out.
pub fn forward_loss_batch<'m, F: Scalar>(
    g: &mut Graph<'m, F>,
    model: &'m Model<F>,
    batch: &PaddedBatch,
    mut dropout: Option<&mut DropoutSampler>,
) -> Result<BatchForward, NeuralError> {
    let cfg = model.config();
    if batch.tgt.lengths().iter().any(|&l| l < 2) {
        return Err(NeuralError::ShapeMismatch {
            context: "forward_loss".into(),
            detail: "target sequences need at least two tokens (BOS + EOS)".into(),
        });
    }
    batch.tgt.check_range(cfg.vocab_size)?;

    let enc = encode_batch(g, model, &batch.src, dropout.as_deref_mut())?;
    let mut state = DecoderState::from_encoder(g, &enc, cfg.hidden_size, batch.src.batch());

    let mut nlls = Vec::new();
    let mut step_logits = Vec::new();
    for t in 0..batch.tgt.steps() - 1 {
        let prev = batch.tgt.step(t);
        let gold = batch.tgt.step(t + 1);
        let mask: Vec<bool> = batch.tgt.lengths().iter().map(|&l| t + 1 < l).collect();
        let (logits, next, _) = decoder_step(g, model, prev, &state, &enc, dropout.as_deref_mut())?;
        nlls.push(g.nll_sum(logits, gold, &mask));
        step_logits.push(logits);
        state = next;
    }
    let target_tokens = batch.target_tokens();
    let total = g.add_n(&nlls);
    let loss = g.scale(total, F::from_f64(1.0 / target_tokens as f64));
    Ok(BatchForward {
        loss,
        step_logits,
        target_tokens,
    })
}

/// Single-pair teacher-forced loss.
pub fn forward_loss<'m, F: Scalar>(
    g: &mut Graph<'m, F>,
    model: &'m Model<F>,
    src_ids: &[u32],
    tgt_ids: &[u32],
    dropout: Option<&mut DropoutSampler>,
) -> Result<NodeId, NeuralError> {
    if src_ids.is_empty() || tgt_ids.is_empty() {
        return Err(NeuralError::ShapeMismatch {
            context: "forward_loss".into(),
            detail: "source and target must be non-empty".into(),
        });
    }
    let batch = PaddedBatch::from_pairs(&[(src_ids.to_vec(), tgt_ids.to_vec())]);
    Ok(forward_loss_batch(g, model, &batch, dropout)?.loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::ModelConfig;
    use crate::neural::scalar::sigmoid;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    fn tiny_model(seed: u64) -> Model<f64> {
        Model::init(
            ModelConfig {
                num_layers: 2,
                hidden_size: 8,
                embedding_size: 8,
                vocab_size: 20,
                dropout_rate: 0.2,
                ..ModelConfig::default()
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn lstm_cell_all_zero_inputs_give_zero_state() {
        let mut g = Graph::<f64>::detached();
        let h = 3;
        let wi = g.var(Tensor::zeros(&[4 * h, 2]));
        let wh = g.var(Tensor::zeros(&[4 * h, h]));
        let b = g.var(Tensor::zeros(&[4 * h, 1]));
        let x = g.var(Tensor::zeros(&[2, 1]));
        let hp = g.var(Tensor::zeros(&[h, 1]));
        let cp = g.var(Tensor::zeros(&[h, 1]));
        let (h1, c1) = lstm_cell(&mut g, wi, wh, b, x, hp, cp).unwrap();
        assert!(g.value(h1).data().iter().all(|&v| v == 0.0));
        assert!(g.value(c1).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_cell_scalar_saturation_matches_hand_formula() {
        // Scalar case: x = h = c = 0, all weights 0, large positive biases
        // on the input, output and cell gates.
        let big = 10.0f64;
        let mut g = Graph::<f64>::detached();
        let wi = g.var(Tensor::zeros(&[4, 1]));
        let wh = g.var(Tensor::zeros(&[4, 1]));
        // gate order i, f, o, g
        let b = g.var(t(&[4, 1], &[big, 0.0, big, big]));
        let x = g.var(Tensor::zeros(&[1, 1]));
        let hp = g.var(Tensor::zeros(&[1, 1]));
        let cp = g.var(Tensor::zeros(&[1, 1]));
        let (h1, c1) = lstm_cell(&mut g, wi, wh, b, x, hp, cp).unwrap();
        // independent evaluation of the gate equations
        let i = sigmoid(big);
        let o = sigmoid(big);
        let cand = big.tanh();
        let c_expect = i * cand; // f·c = σ(0)·0 = 0
        let h_expect = o * c_expect.tanh();
        assert!((g.value(c1).item() - c_expect).abs() < 1e-15);
        assert!((g.value(h1).item() - h_expect).abs() < 1e-15);
        // saturation limit: i, o → 1 and g → 1, so h' → 1·tanh(1)
        assert!((h_expect - 1.0f64.tanh()).abs() < 1e-3);
    }

    #[test]
    fn lstm_cell_rejects_dimension_mismatch() {
        let mut g = Graph::<f64>::detached();
        let wi = g.var(Tensor::zeros(&[8, 2]));
        let wh = g.var(Tensor::zeros(&[8, 3])); // wrong: 4H=8 → H=2
        let b = g.var(Tensor::zeros(&[8, 1]));
        let x = g.var(Tensor::zeros(&[2, 1]));
        let h = g.var(Tensor::zeros(&[2, 1]));
        let c = g.var(Tensor::zeros(&[2, 1]));
        assert!(lstm_cell(&mut g, wi, wh, b, x, h, c).is_err());
    }

    #[test]
    fn attention_uniform_weights_for_equal_scores() {
        let mut g = Graph::<f64>::detached();
        let h = 2;
        // two identical encoder steps → equal scores → uniform weights
        let s = t(&[h, 1], &[0.3, -0.4]);
        let s0 = g.var(s.clone());
        let s1 = g.var(s);
        let pack = g.pack_steps(&[s0, s1]);
        let w_c = g.var(t(&[h, 2 * h], &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]));
        let q = g.var(t(&[h, 1], &[1.0, 2.0]));
        let out = attention(&mut g, w_c, q, pack, pack, None);
        let w = g.value(out.weights);
        assert!((w.at2(0, 0) - 0.5).abs() < 1e-12);
        assert!((w.at2(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn attention_single_step_weight_is_one_and_context_is_state() {
        let mut g = Graph::<f64>::detached();
        let s0 = g.var(t(&[2, 1], &[0.7, -0.2]));
        let pack = g.pack_steps(&[s0]);
        let w_c = g.var(Tensor::zeros(&[2, 4]));
        let q = g.var(t(&[2, 1], &[0.5, 0.5]));
        let out = attention(&mut g, w_c, q, pack, pack, None);
        assert!((g.value(out.weights).item() - 1.0).abs() < 1e-12);
        assert_eq!(g.value(out.context).data(), g.value(s0).data());
    }

    #[test]
    fn attention_hand_computed_small_case() {
        // hidden 2, T 2, dot scores, small integer matrices
        let mut g = Graph::<f64>::detached();
        let e0 = g.var(t(&[2, 1], &[1.0, 0.0]));
        let e1 = g.var(t(&[2, 1], &[0.0, 2.0]));
        let pack = g.pack_steps(&[e0, e1]);
        let w_c = g.var(t(&[2, 4], &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        let q = g.var(t(&[2, 1], &[1.0, 1.0]));
        let out = attention(&mut g, w_c, q, pack, pack, None);
        // scores: e0·q = 1, e1·q = 2 → weights = softmax([1,2])
        let z = 1.0f64.exp() + 2.0f64.exp();
        let (w0, w1) = (1.0f64.exp() / z, 2.0f64.exp() / z);
        let wv = g.value(out.weights);
        assert!((wv.at2(0, 0) - w0).abs() < 1e-12);
        assert!((wv.at2(1, 0) - w1).abs() < 1e-12);
        // context = w0·e0 + w1·e1 = [w0, 2·w1]
        let cv = g.value(out.context);
        assert!((cv.at2(0, 0) - w0).abs() < 1e-12);
        assert!((cv.at2(1, 0) - 2.0 * w1).abs() < 1e-12);
        // h_att = tanh of the first two rows of [context; q] under this W_c
        let hv = g.value(out.h_att);
        assert!((hv.at2(0, 0) - w0.tanh()).abs() < 1e-12);
        assert!((hv.at2(1, 0) - (2.0 * w1).tanh()).abs() < 1e-12);
    }

    #[test]
    fn attention_weights_sum_to_one_under_mask() {
        let model = tiny_model(5);
        let mut g = Graph::attached(&model);
        let src = PaddedIds::from_sequences(&[vec![1, 4, 5, 2], vec![1, 6, 2]]);
        let enc = encode_batch(&mut g, &model, &src, None).unwrap();
        let state = DecoderState::from_encoder(&mut g, &enc, 8, 2);
        let (_, _, attn) = decoder_step(&mut g, &model, &[1, 1], &state, &enc, None).unwrap();
        let w = g.value(attn.weights);
        for b in 0..2 {
            let sum: f64 = (0..w.rows()).map(|t| w.at2(t, b)).sum();
            assert!((sum - 1.0).abs() < 1e-6, "column {b} sums to {sum}");
            assert!((0..w.rows()).all(|t| w.at2(t, b) >= 0.0));
        }
        // padded position of the shorter sequence carries zero weight
        assert_eq!(w.at2(3, 1), 0.0);
    }

    #[test]
    fn encode_sequence_shapes_and_determinism() {
        let model = tiny_model(11);
        let states = encode_sequence(&model, &[1, 7, 9, 2], None).unwrap();
        assert_eq!(states.shape(), &[4, 8]);
        let again = encode_sequence(&model, &[1, 7, 9, 2], None).unwrap();
        assert_eq!(states.data(), again.data());
        let one = encode_sequence(&model, &[3], None).unwrap();
        assert_eq!(one.shape(), &[1, 8]);
    }

    #[test]
    fn encoder_states_have_default_hidden_width() {
        // default hidden size, small vocabulary to keep the test light
        let model = Model::<f32>::init(
            ModelConfig {
                vocab_size: 50,
                embedding_size: 16,
                ..ModelConfig::default()
            },
            1,
        )
        .unwrap();
        let states = encode_sequence(&model, &[1, 5, 9, 12, 2], None).unwrap();
        assert_eq!(states.shape(), &[5, 512]);
    }

    #[test]
    fn encode_rejects_out_of_range_ids() {
        let model = tiny_model(11);
        assert!(matches!(
            encode_sequence(&model, &[1, 99, 2], None),
            Err(NeuralError::IdOutOfRange { id: 99, .. })
        ));
    }

    #[test]
    fn decoder_logits_shape_and_softmax_normalization() {
        let model = tiny_model(2);
        let mut g = Graph::attached(&model);
        let src = PaddedIds::from_sequences(&[vec![1, 4, 2]]);
        let enc = encode_batch(&mut g, &model, &src, None).unwrap();
        let state = DecoderState::from_encoder(&mut g, &enc, 8, 1);
        let (logits, _, _) = decoder_step(&mut g, &model, &[1], &state, &enc, None).unwrap();
        assert_eq!(g.value(logits).shape(), &[20, 1]);
        let p = g.softmax_cols(logits);
        let sum: f64 = g.value(p).data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fresh_model_loss_is_close_to_log_vocab() {
        // near-zero logits → roughly uniform distribution → loss ≈ ln V
        let model = tiny_model(17);
        let mut g = Graph::attached(&model);
        let loss = forward_loss(&mut g, &model, &[1, 5, 6, 2], &[1, 7, 8, 9, 2], None).unwrap();
        let v = g.value(loss).item();
        let expect = (20f64).ln();
        assert!(
            (v - expect).abs() / expect < 0.10,
            "loss {v} vs ln V {expect}"
        );
        assert!(v.is_finite());
    }

    #[test]
    fn f32_and_f64_losses_agree() {
        let cfg = ModelConfig {
            num_layers: 2,
            hidden_size: 8,
            embedding_size: 8,
            vocab_size: 20,
            dropout_rate: 0.0,
            ..ModelConfig::default()
        };
        let m32 = Model::<f32>::init(cfg.clone(), 101).unwrap();
        let m64 = Model::<f64>::init(cfg, 101).unwrap();
        let src = [1u32, 4, 7, 9, 2];
        let tgt = [1u32, 5, 6, 2];
        let mut g32 = Graph::attached(&m32);
        let l32 = forward_loss(&mut g32, &m32, &src, &tgt, None).unwrap();
        let mut g64 = Graph::attached(&m64);
        let l64 = forward_loss(&mut g64, &m64, &src, &tgt, None).unwrap();
        let (a, b) = (g32.value(l32).item() as f64, g64.value(l64).item());
        assert!((a - b).abs() / b.abs() < 1e-4, "f32 {a} vs f64 {b}");
    }

    #[test]
    fn batch_loss_matches_mean_of_single_losses() {
        let model = tiny_model(23);
        let pairs = vec![
            (vec![1, 4, 2], vec![1, 5, 6, 2]),
            (vec![1, 7, 8, 9, 2], vec![1, 10, 2]),
        ];
        let batch = PaddedBatch::from_pairs(&pairs);
        let mut g = Graph::attached(&model);
        let out = forward_loss_batch(&mut g, &model, &batch, None).unwrap();
        let batch_loss = g.value(out.loss).item();

        let mut weighted = 0.0;
        let mut tokens = 0usize;
        for (src, tgt) in &pairs {
            let mut g1 = Graph::attached(&model);
            let l = forward_loss(&mut g1, &model, src, tgt, None).unwrap();
            let n = tgt.len() - 1;
            weighted += g1.value(l).item() * n as f64;
            tokens += n;
        }
        assert!((batch_loss - weighted / tokens as f64).abs() < 1e-9);
    }
}
