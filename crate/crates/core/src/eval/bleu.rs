//! Corpus-level BLEU with the classical brevity penalty.

use std::collections::HashMap;

use serde::Serialize;

use super::EvalError;
use crate::textpipe::Sentence;

/// Corpus BLEU decomposition on the 0–100 scale.
#[derive(Debug, Clone, Serialize)]
pub struct BleuScore {
    pub score: f64,
    /// Modified n-gram precisions p1..pn.
    pub precisions: Vec<f64>,
    /// `exp(1 − r/c)` when the hypothesis is shorter than the reference,
    /// 1 otherwise.
    pub brevity_penalty: f64,
    pub hypothesis_length: usize,
    pub reference_length: usize,
    pub smoothed: bool,
}

impl BleuScore {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bleu serialization")
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU of `hyps` against aligned single references `refs`: clipped
/// n-gram matches and totals are summed over all segments, combined as the
/// geometric mean of p1..p_max_n times the brevity penalty.
///
/// Unsmoothed (the corpus-level default): any zero precision zeroes the
/// score. With `smoothing` enabled every precision becomes
/// `(matches+1)/(total+1)`; that variant is for sentence-level diagnostics
/// only.
pub fn bleu_with_options(
    hyps: &[Sentence],
    refs: &[Sentence],
    max_n: usize,
    smoothing: bool,
) -> Result<BleuScore, EvalError> {
    if max_n == 0 {
        return Err(EvalError::BadMaxN);
    }
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }

    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, reference) in hyps.iter().zip(refs) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=max_n {
            let hyp_counts = ngram_counts(hyp.tokens(), n);
            let ref_counts = ngram_counts(reference.tokens(), n);
            for (gram, count) in &hyp_counts {
                totals[n - 1] += count;
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += (*count).min(clip);
            }
        }
    }

    let precisions: Vec<f64> = (0..max_n)
        .map(|i| {
            if smoothing {
                (matches[i] + 1) as f64 / (totals[i] + 1) as f64
            } else if totals[i] == 0 {
                0.0
            } else {
                matches[i] as f64 / totals[i] as f64
            }
        })
        .collect();

    let brevity_penalty = if hyp_len > ref_len || hyp_len == 0 {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };

    // Orders where the hypothesis side has no n-grams at all carry no
    // evidence and are excluded from the geometric mean; this keeps
    // bleu(x, x) = 100 for corpora of very short sentences. An order with
    // n-grams but no matches still zeroes the unsmoothed score.
    let counted: Vec<f64> = (0..max_n)
        .filter(|&i| totals[i] > 0)
        .map(|i| {
            if smoothing {
                (matches[i] + 1) as f64 / (totals[i] + 1) as f64
            } else {
                matches[i] as f64 / totals[i] as f64
            }
        })
        .collect();
    let score = if hyp_len == 0 || counted.is_empty() || counted.iter().any(|&p| p <= 0.0) {
        0.0
    } else {
        let log_mean = counted.iter().map(|p| p.ln()).sum::<f64>() / counted.len() as f64;
        brevity_penalty * log_mean.exp() * 100.0
    };

    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty,
        hypothesis_length: hyp_len,
        reference_length: ref_len,
        smoothed: smoothing,
    })
}

/// Unsmoothed corpus BLEU with n-grams up to `max_n` (use 4 for the
/// standard metric).
pub fn bleu(hyps: &[Sentence], refs: &[Sentence], max_n: usize) -> Result<BleuScore, EvalError> {
    bleu_with_options(hyps, refs, max_n, false)
}
