//! Greedy and beam decoding over a trained model.
//!
//! Beam search is generic over a [`SequenceScorer`] so its ranking can be
//! verified against exhaustive enumeration on hand-built toy scorers; the
//! trained model plugs in through [`ModelScorer`].

use super::EvalError;
use crate::neural::{
    decoder_step, encode_batch, DecoderState, EncoderOutput, Graph, Model, PaddedIds, Scalar,
    Tensor,
};
use crate::textpipe::vocab::{BOS_ID, EOS_ID, UNK_ID};
use crate::textpipe::{decode_ids, encode, Sentence, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam,
}

/// What to emit when the decoder produces UNK: keep the token, or copy the
/// source token under the attention argmax of that step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnkPolicy {
    Keep,
    CopySourceArgmaxAttention,
}

impl UnkPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "keep" => Some(Self::Keep),
            "copy" | "copy-source-argmax-attention" => Some(Self::CopySourceArgmaxAttention),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub beam_size: usize,
    pub max_output_length: usize,
    pub unk_policy: UnkPolicy,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            mode: DecodeMode::Greedy,
            beam_size: 5,
            max_output_length: 100,
            unk_policy: UnkPolicy::Keep,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.beam_size < 1 {
            return Err(EvalError::BadConfig {
                detail: "beam_size must be ≥ 1".into(),
            });
        }
        if self.max_output_length < 1 {
            return Err(EvalError::BadConfig {
                detail: "max_output_length must be ≥ 1".into(),
            });
        }
        Ok(())
    }
}

/// One decoded sequence: generated ids (terminating EOS included when the
/// decoder emitted one), the length-normalized score, and the attention
/// argmax (a source position) per generated token.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSequence {
    pub ids: Vec<u32>,
    pub score: f64,
    pub attn_argmax: Vec<Option<usize>>,
}

impl DecodedSequence {
    /// Generated ids without the trailing EOS.
    pub fn surface_ids(&self) -> &[u32] {
        match self.ids.last() {
            Some(&id) if id == EOS_ID => &self.ids[..self.ids.len() - 1],
            _ => &self.ids,
        }
    }
}

/// Anything beam search can drive: a start state, a per-step distribution
/// over the vocabulary, and the follow-up state.
pub trait SequenceScorer {
    type State: Clone;
    fn initial_state(&self) -> Self::State;
    /// Log-probabilities over the vocabulary given the previously emitted
    /// id, the next state, and optionally the attention argmax position.
    fn step(&self, prev_id: u32, state: &Self::State) -> (Vec<f64>, Self::State, Option<usize>);
    fn vocab_size(&self) -> usize;
}

/// Length-normalized hypothesis score: sum of token log-probabilities
/// divided by the number of generated tokens (EOS included).
fn normalized(sum_logprob: f64, len: usize) -> f64 {
    sum_logprob / len.max(1) as f64
}

/// Greedy decoding: the locally best token at every step, stopping at EOS
/// or the length cap. Identical to beam search with `beam_size = 1`.
pub fn greedy_decode<S: SequenceScorer>(scorer: &S, max_len: usize) -> DecodedSequence {
    let mut state = scorer.initial_state();
    let mut prev = BOS_ID;
    let mut ids = Vec::new();
    let mut attn = Vec::new();
    let mut sum_logprob = 0.0;
    for _ in 0..max_len {
        let (logprobs, next, pos) = scorer.step(prev, &state);
        let (best, &best_lp) = logprobs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("non-empty vocabulary");
        ids.push(best as u32);
        attn.push(pos);
        sum_logprob += best_lp;
        state = next;
        prev = best as u32;
        if prev == EOS_ID {
            break;
        }
    }
    let score = normalized(sum_logprob, ids.len());
    DecodedSequence {
        ids,
        score,
        attn_argmax: attn,
    }
}

#[derive(Clone)]
struct Hypothesis<S> {
    ids: Vec<u32>,
    attn: Vec<Option<usize>>,
    state: S,
    sum_logprob: f64,
}

/// Beam search maximizing the length-normalized log-probability. Finished
/// hypotheses (EOS emitted) leave the beam; the best normalized hypothesis
/// among finished and length-capped candidates wins.
pub fn beam_search<S: SequenceScorer>(
    scorer: &S,
    dc: &DecodeConfig,
) -> Result<DecodedSequence, EvalError> {
    dc.validate()?;
    let beam_size = dc.beam_size;
    let mut live = vec![Hypothesis::<S::State> {
        ids: Vec::new(),
        attn: Vec::new(),
        state: scorer.initial_state(),
        sum_logprob: 0.0,
    }];
    let mut finished: Vec<DecodedSequence> = Vec::new();

    for _ in 0..dc.max_output_length {
        let mut candidates: Vec<(f64, u32, usize, Option<usize>)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (hi, hyp) in live.iter().enumerate() {
            let prev = hyp.ids.last().copied().unwrap_or(BOS_ID);
            let (logprobs, next, pos) = scorer.step(prev, &hyp.state);
            next_states.push(next);
            let mut ranked: Vec<(usize, f64)> = logprobs.iter().copied().enumerate().collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for (tok, lp) in ranked.into_iter().take(beam_size) {
                candidates.push((hyp.sum_logprob + lp, tok as u32, hi, pos));
            }
        }
        // Highest joint log-probability first; ties broken toward the lower
        // token id so beam_size 1 reproduces greedy argmax exactly.
        candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        candidates.truncate(beam_size);

        let mut next_live = Vec::with_capacity(beam_size);
        for (sum_logprob, tok, hi, pos) in candidates {
            let mut ids = live[hi].ids.clone();
            ids.push(tok);
            let mut attn = live[hi].attn.clone();
            attn.push(pos);
            if tok == EOS_ID {
                finished.push(DecodedSequence {
                    score: normalized(sum_logprob, ids.len()),
                    ids,
                    attn_argmax: attn,
                });
            } else {
                next_live.push(Hypothesis {
                    ids,
                    attn,
                    state: next_states[hi].clone(),
                    sum_logprob,
                });
            }
        }
        live = next_live;
        if live.is_empty() {
            break;
        }
    }

    for hyp in live {
        finished.push(DecodedSequence {
            score: normalized(hyp.sum_logprob, hyp.ids.len()),
            ids: hyp.ids,
            attn_argmax: hyp.attn,
        });
    }
    finished
        .into_iter()
        .max_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap()
                .then(b.ids.cmp(&a.ids))
        })
        .ok_or(EvalError::BadConfig {
            detail: "decode produced no hypotheses".into(),
        })
}

// ---------------------------------------------------------------------------
// Model-backed scoring
// ---------------------------------------------------------------------------

/// Encoder outputs extracted as plain tensors so decoding can build a small
/// fresh graph per step (and share one encoding across beam hypotheses).
pub struct EncodedValues<F: Scalar> {
    raw_pack: Tensor<F>,
    proj_pack: Tensor<F>,
    mask: Tensor<F>,
    final_states: Vec<(Tensor<F>, Tensor<F>)>,
    source_steps: usize,
}

impl<F: Scalar> EncodedValues<F> {
    fn extract(g: &Graph<'_, F>, enc: &EncoderOutput) -> Self {
        Self {
            raw_pack: g.value(enc.raw_pack).clone(),
            proj_pack: g.value(enc.proj_pack).clone(),
            mask: g.value(enc.mask).clone(),
            final_states: enc
                .final_states
                .iter()
                .map(|(h, c)| (g.value(*h).clone(), g.value(*c).clone()))
                .collect(),
            source_steps: g.value(enc.raw_pack).shape()[0],
        }
    }

    fn to_graph<'m>(&self, g: &mut Graph<'m, F>) -> EncoderOutput {
        EncoderOutput {
            top_states: Vec::new(),
            raw_pack: g.leaf(self.raw_pack.clone()),
            proj_pack: g.leaf(self.proj_pack.clone()),
            mask: g.leaf(self.mask.clone()),
            final_states: Vec::new(),
        }
    }
}

/// Decoder state as plain tensors (clonable per beam hypothesis).
#[derive(Clone)]
pub struct StateValues<F: Scalar> {
    layers: Vec<(Tensor<F>, Tensor<F>)>,
    attn_vec: Tensor<F>,
}

/// [`SequenceScorer`] backed by a trained model and one encoded source
/// sequence.
pub struct ModelScorer<'a, F: Scalar> {
    model: &'a Model<F>,
    enc: EncodedValues<F>,
}

impl<'a, F: Scalar> ModelScorer<'a, F> {
    /// Encodes `src_ids` (inference mode, no dropout) and wraps the result.
    pub fn new(model: &'a Model<F>, src_ids: &[u32]) -> Result<Self, EvalError> {
        let mut g = Graph::attached(model);
        let src = PaddedIds::from_sequences(&[src_ids.to_vec()]);
        let enc = encode_batch(&mut g, model, &src, None)?;
        Ok(Self {
            model,
            enc: EncodedValues::extract(&g, &enc),
        })
    }
}

impl<'a, F: Scalar> SequenceScorer for ModelScorer<'a, F> {
    type State = StateValues<F>;

    fn initial_state(&self) -> StateValues<F> {
        let hidden = self.model.config().hidden_size;
        StateValues {
            layers: self.enc.final_states.clone(),
            attn_vec: Tensor::zeros(&[hidden, 1]),
        }
    }

    fn step(
        &self,
        prev_id: u32,
        state: &StateValues<F>,
    ) -> (Vec<f64>, StateValues<F>, Option<usize>) {
        let mut g = Graph::attached(self.model);
        let enc = self.enc.to_graph(&mut g);
        let graph_state = DecoderState {
            layers: state
                .layers
                .iter()
                .map(|(h, c)| (g.leaf(h.clone()), g.leaf(c.clone())))
                .collect(),
            attn_vec: g.leaf(state.attn_vec.clone()),
        };
        let (logits, next, attn) =
            decoder_step(&mut g, self.model, &[prev_id], &graph_state, &enc, None)
                .expect("decode step over validated inputs");
        let logprobs = log_softmax_col(g.value(logits));
        let weights = g.value(attn.weights);
        let argmax = (0..self.enc.source_steps).max_by(|&a, &b| {
            weights
                .at2(a, 0)
                .partial_cmp(&weights.at2(b, 0))
                .unwrap()
                .then(b.cmp(&a))
        });
        let next_values = StateValues {
            layers: next
                .layers
                .iter()
                .map(|(h, c)| (g.value(*h).clone(), g.value(*c).clone()))
                .collect(),
            attn_vec: g.value(next.attn_vec).clone(),
        };
        (logprobs, next_values, argmax)
    }

    fn vocab_size(&self) -> usize {
        self.model.config().vocab_size
    }
}

fn log_softmax_col<F: Scalar>(logits: &Tensor<F>) -> Vec<f64> {
    let vals: Vec<f64> = (0..logits.rows())
        .map(|i| logits.at2(i, 0).to_f64())
        .collect();
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = vals.iter().map(|v| (v - hi).exp()).sum::<f64>().ln() + hi;
    vals.into_iter().map(|v| v - lse).collect()
}

// ---------------------------------------------------------------------------
// Corpus-level decoding
// ---------------------------------------------------------------------------

/// Greedy-decodes a whole corpus in padded batches. Returns one decoded
/// sequence per input, in input order.
pub fn greedy_decode_corpus<F: Scalar>(
    model: &Model<F>,
    sources: &[Vec<u32>],
    max_len: usize,
    batch_size: usize,
) -> Result<Vec<DecodedSequence>, EvalError> {
    let mut out = Vec::with_capacity(sources.len());
    for chunk in sources.chunks(batch_size.max(1)) {
        out.extend(greedy_decode_batch(model, chunk, max_len)?);
    }
    Ok(out)
}

fn greedy_decode_batch<F: Scalar>(
    model: &Model<F>,
    sources: &[Vec<u32>],
    max_len: usize,
) -> Result<Vec<DecodedSequence>, EvalError> {
    let batch = sources.len();
    let mut g = Graph::attached(model);
    let src = PaddedIds::from_sequences(sources);
    let enc = encode_batch(&mut g, model, &src, None)?;
    let mut state = DecoderState::from_encoder(&mut g, &enc, model.config().hidden_size, batch);

    let mut ids: Vec<Vec<u32>> = vec![Vec::new(); batch];
    let mut attn: Vec<Vec<Option<usize>>> = vec![Vec::new(); batch];
    let mut scores = vec![0.0f64; batch];
    let mut done = vec![false; batch];
    let mut prev = vec![BOS_ID; batch];

    for _ in 0..max_len {
        let (logits, next, attn_out) = decoder_step(&mut g, model, &prev, &state, &enc, None)?;
        let lv = g.value(logits);
        let wv = g.value(attn_out.weights);
        for b in 0..batch {
            if done[b] {
                continue;
            }
            let col: Vec<f64> = (0..lv.rows()).map(|i| lv.at2(i, b).to_f64()).collect();
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = col.iter().map(|v| (v - hi).exp()).sum::<f64>().ln() + hi;
            let (best, best_lp) = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, &v)| (i as u32, v - lse))
                .unwrap();
            let steps = src.lengths()[b];
            let pos = (0..steps).max_by(|&x, &y| {
                wv.at2(x, b)
                    .partial_cmp(&wv.at2(y, b))
                    .unwrap()
                    .then(y.cmp(&x))
            });
            ids[b].push(best);
            attn[b].push(pos);
            scores[b] += best_lp;
            if best == EOS_ID {
                done[b] = true;
            }
        }
        state = next;
        if done.iter().all(|&d| d) {
            break;
        }
        prev = ids.iter().map(|seq| *seq.last().unwrap()).collect();
    }

    Ok((0..batch)
        .map(|b| DecodedSequence {
            score: normalized(scores[b], ids[b].len()),
            ids: std::mem::take(&mut ids[b]),
            attn_argmax: std::mem::take(&mut attn[b]),
        })
        .collect())
}

/// Decodes one tokenized (and, when applicable, anonymized) sentence into
/// its embellished form. The output never contains BOS/EOS and respects the
/// configured length cap; a degenerate empty decode yields an empty
/// sentence.
pub fn embellish<F: Scalar>(
    s: &Sentence,
    model: &Model<F>,
    vocab: &Vocabulary,
    dc: &DecodeConfig,
) -> Result<Sentence, EvalError> {
    dc.validate()?;
    let src_ids = encode(s, vocab);
    let scorer = ModelScorer::new(model, &src_ids)?;
    let decoded = match dc.mode {
        DecodeMode::Greedy => greedy_decode(&scorer, dc.max_output_length),
        DecodeMode::Beam => beam_search(&scorer, dc)?,
    };

    let surface = decoded.surface_ids();
    if dc.unk_policy == UnkPolicy::Keep {
        return Ok(decode_ids(surface, vocab)?);
    }
    Ok(replace_unks_from_source(
        surface,
        &decoded.attn_argmax,
        s,
        vocab,
    )?)
}

/// Copy-from-source UNK replacement: every generated UNK becomes the source
/// token under the attention argmax of the step that produced it. Encoder
/// position p maps to source token p−1 (position 0 is BOS); argmaxes on the
/// BOS/EOS positions keep the UNK token.
pub fn replace_unks_from_source(
    surface: &[u32],
    attn_argmax: &[Option<usize>],
    source: &Sentence,
    vocab: &Vocabulary,
) -> Result<Sentence, crate::textpipe::TextError> {
    let mut tokens = Vec::with_capacity(surface.len());
    for (i, &id) in surface.iter().enumerate() {
        if id == UNK_ID {
            if let Some(Some(pos)) = attn_argmax.get(i) {
                if *pos >= 1 && *pos <= source.len() {
                    tokens.push(source.tokens()[*pos - 1].clone());
                    continue;
                }
            }
        }
        tokens.push(vocab.token_of(id).unwrap_or("<unk>").to_string());
    }
    Sentence::from_tokens(tokens)
}
