//! Output taxonomy: classifying each generated sentence against its input.
//!
//! The thresholds are calibrations, exposed through [`ClassifyConfig`];
//! content-token overlap counts non-placeholder, non-punctuation tokens.

use serde::Serialize;

use crate::textpipe::vocab::UNK_TOKEN;
use crate::textpipe::{is_placeholder, is_punctuation_token, Sentence};

/// Sentence-mode classes, mutually exclusive and exhaustive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputClass {
    Reproduction,
    LexicalSubstitution,
    MissingWords,
    Unrelated,
}

impl OutputClass {
    pub const ALL: [OutputClass; 4] = [
        OutputClass::Reproduction,
        OutputClass::LexicalSubstitution,
        OutputClass::MissingWords,
        OutputClass::Unrelated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputClass::Reproduction => "reproduction",
            OutputClass::LexicalSubstitution => "lexical_substitution",
            OutputClass::MissingWords => "missing_words",
            OutputClass::Unrelated => "unrelated",
        }
    }
}

/// Pair-mode classes, mutually exclusive and exhaustive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    Combined,
    FirstKept,
    Unrelated,
    Other,
}

impl PairClass {
    pub const ALL: [PairClass; 4] = [
        PairClass::Combined,
        PairClass::FirstKept,
        PairClass::Unrelated,
        PairClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PairClass::Combined => "combined",
            PairClass::FirstKept => "first_kept",
            PairClass::Unrelated => "unrelated",
            PairClass::Other => "other",
        }
    }
}

/// Overlap thresholds of the decision procedures.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyConfig {
    /// Minimum content overlap for a lexical substitution (and for each
    /// member of a combined pair).
    pub substitution_overlap: f64,
    /// Minimum overlap with the first member for `first_kept`.
    pub first_kept_overlap: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            substitution_overlap: 0.30,
            first_kept_overlap: 0.60,
        }
    }
}

/// UNK tokens are dropped and case is folded before comparison, mirroring
/// the discounting of out-of-vocabulary and formatting noise.
fn normalized_tokens(s: &Sentence) -> Vec<String> {
    s.tokens()
        .iter()
        .filter(|t| t.as_str() != UNK_TOKEN)
        .map(|t| t.to_lowercase())
        .collect()
}

fn content_tokens(s: &Sentence) -> Vec<String> {
    normalized_tokens(s)
        .into_iter()
        .filter(|t| !is_placeholder(&t.to_uppercase()) && !is_punctuation_token(t))
        .collect()
}

/// Fraction of `member`'s content tokens (multiset) covered by `output`.
/// A member without content tokens overlaps nothing.
fn content_overlap(member: &Sentence, output: &Sentence) -> f64 {
    let m = content_tokens(member);
    if m.is_empty() {
        return 0.0;
    }
    let mut out = content_tokens(output);
    let mut hit = 0usize;
    for tok in &m {
        if let Some(i) = out.iter().position(|o| o == tok) {
            out.swap_remove(i);
            hit += 1;
        }
    }
    hit as f64 / m.len() as f64
}

/// Edit operations of a minimal token alignment.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
struct EditOps {
    substitutions: usize,
    deletions: usize,
    insertions: usize,
}

/// Levenshtein alignment (unit costs) between two token sequences.
fn align(input: &[String], output: &[String]) -> EditOps {
    let (n, m) = (input.len(), output.len());
    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dist[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dist[i - 1][j - 1] + usize::from(input[i - 1] != output[j - 1]);
            dist[i][j] = sub.min(dist[i - 1][j] + 1).min(dist[i][j - 1] + 1);
        }
    }
    // Traceback, preferring matches/substitutions, then deletions.
    let mut ops = EditOps::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0
            && j > 0
            && dist[i][j] == dist[i - 1][j - 1] + usize::from(input[i - 1] != output[j - 1])
        {
            if input[i - 1] != output[j - 1] {
                ops.substitutions += 1;
            }
            i -= 1;
            j -= 1;
        } else if i > 0 && dist[i][j] == dist[i - 1][j] + 1 {
            ops.deletions += 1;
            i -= 1;
        } else {
            ops.insertions += 1;
            j -= 1;
        }
    }
    ops
}

/// Sentence-mode decision procedure, applied in order:
/// 1. equal after dropping UNK tokens and folding case → reproduction;
/// 2. the minimal alignment only deletes tokens → missing_words;
/// 3. content overlap ≥ threshold and at least one substitution →
///    lexical_substitution;
/// 4. everything else → unrelated.
pub fn classify_output(input: &Sentence, output: &Sentence, cfg: &ClassifyConfig) -> OutputClass {
    let ni = normalized_tokens(input);
    let no = normalized_tokens(output);
    if ni == no {
        return OutputClass::Reproduction;
    }
    let ops = align(&ni, &no);
    if ops.deletions > 0 && ops.substitutions == 0 && ops.insertions == 0 {
        return OutputClass::MissingWords;
    }
    if content_overlap(input, output) >= cfg.substitution_overlap && ops.substitutions > 0 {
        return OutputClass::LexicalSubstitution;
    }
    OutputClass::Unrelated
}

/// Whether the token sequence reads as a single sentence: no terminal
/// punctuation (`.`, `!`, `?`) outside quotation sequences except at the
/// very end. A missing terminal mark still counts as a single sentence.
pub fn is_single_sentence(s: &Sentence) -> bool {
    let mut quote_depth = 0usize;
    let tokens = s.tokens();
    for (i, tok) in tokens.iter().enumerate() {
        match tok.as_str() {
            "''" | "``" | "\"" => {
                quote_depth = if quote_depth == 0 { 1 } else { 0 };
            }
            "." | "!" | "?" if quote_depth == 0 => {
                let internal = tokens[i + 1..]
                    .iter()
                    .any(|t| !matches!(t.as_str(), "''" | "``" | "\""));
                if internal {
                    return false;
                }
            }
            _ => {}
        }
    }
    true
}

/// Pair-mode decision procedure, applied in order:
/// 1. single sentence with content overlap ≥ threshold against each member
///    → combined;
/// 2. overlap ≥ `first_kept_overlap` with the first member and below the
///    base threshold with the second → first_kept;
/// 3. overlap below the base threshold with both members → unrelated;
/// 4. everything else → other.
pub fn classify_pair_output(
    pair: (&Sentence, &Sentence),
    output: &Sentence,
    cfg: &ClassifyConfig,
) -> PairClass {
    let (first, second) = pair;
    let o1 = content_overlap(first, output);
    let o2 = content_overlap(second, output);
    let t = cfg.substitution_overlap;
    if is_single_sentence(output) && o1 >= t && o2 >= t {
        return PairClass::Combined;
    }
    if o1 >= cfg.first_kept_overlap && o2 < t {
        return PairClass::FirstKept;
    }
    if o1 < t && o2 < t {
        return PairClass::Unrelated;
    }
    PairClass::Other
}
