//! Named-entity anonymization: replacing entity mentions with reversible
//! `CATEGORY@k` placeholders.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use super::{EntityCategory, EntityMap, Sentence, TextError};

/// A recognized entity span over a token sequence: `[start, start+len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecognizedSpan {
    pub start: usize,
    pub len: usize,
    pub category: EntityCategory,
}

/// Pluggable entity recognizer. Implementations return non-overlapping
/// spans; overlapping output is rejected by [`anonymize`].
pub trait EntityRecognizer {
    fn recognize(&self, tokens: &[String]) -> Vec<RecognizedSpan>;
}

/// Returns whether a token has the exact placeholder shape `CATEGORY@k`
/// with `k ≥ 1` and no leading zeros.
pub fn is_placeholder(token: &str) -> bool {
    parse_placeholder(token).is_some()
}

/// Splits a placeholder token into its category and index.
pub fn parse_placeholder(token: &str) -> Option<(EntityCategory, u32)> {
    let (cat, idx) = token.split_once('@')?;
    let category = EntityCategory::parse(cat)?;
    if idx.is_empty() || idx.starts_with('0') || !idx.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    idx.parse().ok().map(|k| (category, k))
}

/// Replaces recognized spans with placeholders, reusing the placeholder of
/// any identical surface form already seen in `scope` and numbering new
/// entities by first appearance. Placeholder tokens already present in the
/// input are left untouched and their indices are reserved in the scope.
pub fn anonymize(
    s: &Sentence,
    recognizer: &dyn EntityRecognizer,
    scope: &mut EntityMap,
) -> Result<Sentence, TextError> {
    let tokens = s.tokens();
    let mut spans = recognizer.recognize(tokens);
    spans.sort_by_key(|sp| (sp.start, sp.len));
    for w in spans.windows(2) {
        if w[0].start + w[0].len > w[1].start {
            let show = |sp: &RecognizedSpan| {
                format!(
                    "{}[{}..{}]",
                    sp.category.as_str(),
                    sp.start,
                    sp.start + sp.len
                )
            };
            return Err(TextError::OverlappingSpans {
                first: show(&w[0]),
                second: show(&w[1]),
            });
        }
    }
    for tok in tokens {
        if let Some((category, index)) = parse_placeholder(tok) {
            scope.reserve_index(category, index);
        }
    }

    let mut out = Vec::with_capacity(tokens.len());
    let mut cursor = 0usize;
    for span in &spans {
        if span.len == 0 || span.start + span.len > tokens.len() {
            continue;
        }
        out.extend(tokens[cursor..span.start].iter().cloned());
        let surface = tokens[span.start..span.start + span.len].to_vec();
        let placeholder = match scope.placeholder_of(&surface, span.category) {
            Some(p) => p.to_string(),
            None => scope.allocate(surface, span.category),
        };
        out.push(placeholder);
        cursor = span.start + span.len;
    }
    out.extend(tokens[cursor..].iter().cloned());
    Ok(Sentence::from_tokens_unchecked(out))
}

/// Record of a placeholder that could not be resolved during
/// deanonymization; the token is left in place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingPlaceholder {
    pub position: usize,
    pub token: String,
}

/// Replaces placeholders by their recorded surface forms. Placeholders
/// absent from the map stay in place and are reported as warnings.
pub fn deanonymize(s: &Sentence, m: &EntityMap) -> (Sentence, Vec<MissingPlaceholder>) {
    let mut out = Vec::with_capacity(s.len());
    let mut missing = Vec::new();
    for (position, tok) in s.tokens().iter().enumerate() {
        if is_placeholder(tok) {
            match m.surface_of(tok) {
                Some(surface) => out.extend(surface.iter().cloned()),
                None => {
                    missing.push(MissingPlaceholder {
                        position,
                        token: tok.clone(),
                    });
                    out.push(tok.clone());
                }
            }
        } else {
            out.push(tok.clone());
        }
    }
    (Sentence::from_tokens_unchecked(out), missing)
}

/// Default recognizer: a category gazetteer plus a capitalized-token
/// heuristic.
///
/// The gazetteer matches multi-token entries greedily (longest first) at any
/// position. The heuristic additionally flags capitalized tokens as PERSON
/// when they are not sentence-initial (also not right after terminal
/// punctuation, a colon or a quote), not placeholders, not gazetteer-covered
/// and not common function words.
pub struct GazetteerRecognizer {
    entries: Vec<(Vec<String>, EntityCategory)>,
    use_capitalization_heuristic: bool,
    stopwords: HashSet<&'static str>,
}

/// Closed-class words never flagged by the capitalization heuristic.
const HEURISTIC_STOPWORDS: [&str; 52] = [
    "A", "An", "The", "This", "That", "These", "Those", "He", "She", "It", "They", "We", "You",
    "I", "His", "Her", "Its", "Their", "Our", "My", "Your", "What", "Which", "Who", "Whom",
    "Whose", "When", "Where", "Why", "How", "Can", "Could", "Will", "Would", "Shall", "Should",
    "May", "Might", "Must", "Do", "Does", "Did", "Is", "Are", "Was", "Were", "Be", "At", "In",
    "On", "And", "Get",
];

impl GazetteerRecognizer {
    pub fn new(entries: Vec<(Vec<String>, EntityCategory)>) -> Self {
        let mut entries = entries;
        entries.sort_by_key(|(surface, _)| std::cmp::Reverse(surface.len()));
        Self {
            entries,
            use_capitalization_heuristic: true,
            stopwords: HEURISTIC_STOPWORDS.iter().copied().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn with_capitalization_heuristic(mut self, enabled: bool) -> Self {
        self.use_capitalization_heuristic = enabled;
        self
    }

    /// Loads a tab-separated gazetteer: `CATEGORY<TAB>surface form` per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self, TextError> {
        let io = |source| TextError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io)?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (cat, surface) = trimmed.split_once('\t').ok_or_else(|| TextError::BadLine {
                path: path.display().to_string(),
                line: i + 1,
                reason: "expected CATEGORY<TAB>surface form".into(),
            })?;
            let category = EntityCategory::parse(cat).ok_or_else(|| TextError::BadLine {
                path: path.display().to_string(),
                line: i + 1,
                reason: format!("unknown category {cat:?}"),
            })?;
            let tokens: Vec<String> = surface.split_whitespace().map(str::to_owned).collect();
            if tokens.is_empty() {
                return Err(TextError::BadLine {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: "empty surface form".into(),
                });
            }
            entries.push((tokens, category));
        }
        Ok(Self::new(entries))
    }

    fn sentence_initial_positions(tokens: &[String]) -> Vec<bool> {
        let mut initial = vec![false; tokens.len()];
        let mut next_is_initial = true;
        for (i, tok) in tokens.iter().enumerate() {
            initial[i] = next_is_initial;
            next_is_initial = matches!(tok.as_str(), "." | "!" | "?" | ":" | "''" | "``" | "\"");
        }
        initial
    }
}

impl EntityRecognizer for GazetteerRecognizer {
    fn recognize(&self, tokens: &[String]) -> Vec<RecognizedSpan> {
        let mut covered = vec![false; tokens.len()];
        let mut spans = Vec::new();
        let mut i = 0usize;
        while i < tokens.len() {
            let mut matched = 0usize;
            for (surface, category) in &self.entries {
                if i + surface.len() <= tokens.len()
                    && tokens[i..i + surface.len()]
                        .iter()
                        .zip(surface)
                        .all(|(a, b)| a == b)
                {
                    spans.push(RecognizedSpan {
                        start: i,
                        len: surface.len(),
                        category: *category,
                    });
                    covered[i..i + surface.len()]
                        .iter_mut()
                        .for_each(|c| *c = true);
                    matched = surface.len();
                    break;
                }
            }
            i += matched.max(1);
        }

        if self.use_capitalization_heuristic {
            let initial = Self::sentence_initial_positions(tokens);
            for (i, tok) in tokens.iter().enumerate() {
                if covered[i] || initial[i] || is_placeholder(tok) {
                    continue;
                }
                if self.stopwords.contains(tok.as_str()) {
                    continue;
                }
                let mut chars = tok.chars();
                let capitalized = chars.next().is_some_and(|c| c.is_uppercase())
                    && chars.all(|c| c.is_lowercase() || c == '-');
                if capitalized {
                    spans.push(RecognizedSpan {
                        start: i,
                        len: 1,
                        category: EntityCategory::Person,
                    });
                }
            }
        }
        spans.sort_by_key(|sp| sp.start);
        spans
    }
}

/// Writes entity maps as a sidecar file (`scope_id<TAB>placeholder<TAB>surface`).
pub fn save_sidecar(maps: &[EntityMap], path: &Path) -> Result<(), TextError> {
    use std::io::Write;
    let io = |source| TextError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for m in maps {
        for line in m.to_sidecar_lines() {
            writeln!(f, "{line}").map_err(io)?;
        }
    }
    f.flush().map_err(io)?;
    Ok(())
}

/// Loads every scope of a sidecar file, preserving scope order.
pub fn load_sidecar(path: &Path) -> Result<Vec<EntityMap>, TextError> {
    let io = |source| TextError::Io {
        path: path.display().to_string(),
        source,
    };
    let content = std::fs::read_to_string(path).map_err(io)?;
    let mut order: Vec<String> = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();
    for line in content.lines() {
        if let Some((scope, _)) = line.split_once('\t') {
            if seen.insert(scope.to_string(), ()).is_none() {
                order.push(scope.to_string());
            }
        }
    }
    order
        .into_iter()
        .map(|scope| EntityMap::from_sidecar_lines(&scope, content.lines()))
        .collect()
}
