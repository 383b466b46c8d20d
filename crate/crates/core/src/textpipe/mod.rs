//! Deterministic text preprocessing.
//!
//! Everything in this module is a pure function of its inputs; no global
//! state is kept, so all operations may be called concurrently.

mod anonymize;
mod pair;
mod tokenize;
pub mod vocab;

pub use anonymize::{
    anonymize, deanonymize, is_placeholder, load_sidecar, parse_placeholder, save_sidecar,
    EntityRecognizer, GazetteerRecognizer, MissingPlaceholder, RecognizedSpan,
};
pub use pair::pair_sentences;
pub use tokenize::{detokenize, is_punctuation_token, tokenize};
pub use vocab::{build_vocabulary, decode_ids, encode, Vocabulary};

use std::fmt;
use thiserror::Error;

/// Errors produced by the preprocessing layer.
#[derive(Debug, Error)]
pub enum TextError {
    #[error("token {index} is invalid: {reason}")]
    InvalidToken { index: usize, reason: String },
    #[error("recognizer produced overlapping spans: {first} and {second}")]
    OverlappingSpans { first: String, second: String },
    #[error("placeholder {placeholder} is malformed")]
    MalformedPlaceholder { placeholder: String },
    #[error("id {id} at position {position} is out of range (vocabulary size {vocab_size})")]
    IdOutOfRange {
        id: u32,
        position: usize,
        vocab_size: usize,
    },
    #[error("vocabulary max_size {max_size} is below the minimum of 5")]
    VocabTooSmall { max_size: usize },
    #[error("{path}: line {line}: {reason}")]
    BadLine {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A tokenized sentence: the base processing unit of the whole pipeline.
///
/// `raw` keeps the original untokenized text when the sentence came from
/// raw input; sentences synthesized by pairing or decoding leave it empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
    raw: Option<String>,
}

impl Sentence {
    /// Builds a sentence from tokens, validating the token invariants:
    /// no token is empty and none contains internal whitespace.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, TextError> {
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(TextError::InvalidToken {
                    index: i,
                    reason: "empty token".into(),
                });
            }
            if t.chars().any(char::is_whitespace) {
                return Err(TextError::InvalidToken {
                    index: i,
                    reason: format!("token {t:?} contains whitespace"),
                });
            }
        }
        Ok(Self { tokens, raw: None })
    }

    /// Parses one line of a tokenized corpus file (tokens separated by
    /// whitespace). Splitting on whitespace cannot violate the token
    /// invariants, so this never fails.
    pub fn from_tokenized_line(line: &str) -> Self {
        Self {
            tokens: line.split_whitespace().map(str::to_owned).collect(),
            raw: None,
        }
    }

    pub(crate) fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
        Self { tokens, raw: None }
    }

    pub(crate) fn with_raw(tokens: Vec<String>, raw: String) -> Self {
        Self {
            tokens: Sentence::from_tokens_unchecked(tokens).tokens,
            raw: Some(raw),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn raw(&self) -> Option<&str> {
        self.raw.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Concatenates two sentences (token-level). The raw text is dropped
    /// because the result is synthesized.
    pub fn concat(&self, other: &Sentence) -> Sentence {
        let mut tokens = self.tokens.clone();
        tokens.extend_from_slice(&other.tokens);
        Sentence { tokens, raw: None }
    }

    /// Tokens joined by single spaces: the canonical on-disk form.
    pub fn to_line(&self) -> String {
        self.tokens.join(" ")
    }

    /// Truncates to at most `max_len` tokens, returning whether anything
    /// was cut.
    pub fn truncated(&self, max_len: usize) -> (Sentence, bool) {
        if self.tokens.len() <= max_len {
            (self.clone(), false)
        } else {
            (
                Sentence {
                    tokens: self.tokens[..max_len].to_vec(),
                    raw: None,
                },
                true,
            )
        }
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// Categories taken by anonymization placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityCategory {
    Person,
    Location,
    Organization,
    Misc,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 4] = [
        EntityCategory::Person,
        EntityCategory::Location,
        EntityCategory::Organization,
        EntityCategory::Misc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityCategory::Person => "PERSON",
            EntityCategory::Location => "LOCATION",
            EntityCategory::Organization => "ORGANIZATION",
            EntityCategory::Misc => "MISC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "PERSON" => Some(EntityCategory::Person),
            "LOCATION" => Some(EntityCategory::Location),
            "ORGANIZATION" => Some(EntityCategory::Organization),
            "MISC" => Some(EntityCategory::Misc),
            _ => None,
        }
    }
}

/// One placeholder entry: `PERSON@2` ↔ the surface tokens it replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityEntry {
    pub placeholder: String,
    pub surface: Vec<String>,
    pub category: EntityCategory,
}

/// Reversible placeholder ↔ surface-form mapping, scoped to one document,
/// story or sentence (the numbering restarts per scope).
///
/// Indices within a category are assigned consecutively in order of first
/// appearance. When the input text already contains placeholder tokens
/// (partially anonymized material), their indices are reserved so fresh
/// allocations never collide with them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityMap {
    scope_id: String,
    entries: Vec<EntityEntry>,
    /// Highest index seen or assigned per category.
    next_index: std::collections::HashMap<EntityCategory, u32>,
}

impl EntityMap {
    pub fn new(scope_id: impl Into<String>) -> Self {
        Self {
            scope_id: scope_id.into(),
            entries: Vec::new(),
            next_index: Default::default(),
        }
    }

    pub fn scope_id(&self) -> &str {
        &self.scope_id
    }

    pub fn entries(&self) -> &[EntityEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Looks up the surface form recorded for `placeholder`.
    pub fn surface_of(&self, placeholder: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|e| e.placeholder == placeholder)
            .map(|e| e.surface.as_slice())
    }

    /// Looks up an existing placeholder for a (surface, category) pair.
    pub fn placeholder_of(&self, surface: &[String], category: EntityCategory) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.category == category && e.surface == surface)
            .map(|e| e.placeholder.as_str())
    }

    /// Marks an index as already in use (placeholder tokens present in the
    /// input before anonymization).
    pub(crate) fn reserve_index(&mut self, category: EntityCategory, index: u32) {
        let slot = self.next_index.entry(category).or_insert(0);
        *slot = (*slot).max(index);
    }

    /// Allocates the next placeholder for `category` and records the entry.
    pub(crate) fn allocate(&mut self, surface: Vec<String>, category: EntityCategory) -> String {
        let slot = self.next_index.entry(category).or_insert(0);
        *slot += 1;
        let placeholder = format!("{}@{}", category.as_str(), *slot);
        self.entries.push(EntityEntry {
            placeholder: placeholder.clone(),
            surface,
            category,
        });
        placeholder
    }

    /// Serializes entries as sidecar lines: `scope_id<TAB>placeholder<TAB>surface`.
    pub fn to_sidecar_lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| {
                format!(
                    "{}\t{}\t{}",
                    self.scope_id,
                    e.placeholder,
                    e.surface.join(" ")
                )
            })
            .collect()
    }

    /// Parses sidecar lines belonging to one scope.
    pub fn from_sidecar_lines<'a>(
        scope_id: &str,
        lines: impl Iterator<Item = &'a str>,
    ) -> Result<Self, TextError> {
        let mut map = EntityMap::new(scope_id);
        for (i, line) in lines.enumerate() {
            let mut parts = line.splitn(3, '\t');
            let (scope, placeholder, surface) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(TextError::BadLine {
                        path: "<sidecar>".into(),
                        line: i + 1,
                        reason: "expected scope<TAB>placeholder<TAB>surface".into(),
                    })
                }
            };
            if scope != scope_id {
                continue;
            }
            let (category, index) =
                parse_placeholder(placeholder).ok_or_else(|| TextError::MalformedPlaceholder {
                    placeholder: placeholder.to_string(),
                })?;
            if map.surface_of(placeholder).is_some() {
                return Err(TextError::BadLine {
                    path: "<sidecar>".into(),
                    line: i + 1,
                    reason: format!("duplicate placeholder {placeholder} in scope {scope_id}"),
                });
            }
            map.reserve_index(category, index);
            map.entries.push(EntityEntry {
                placeholder: placeholder.to_string(),
                surface: surface.split_whitespace().map(str::to_owned).collect(),
                category,
            });
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_rejects_bad_tokens() {
        assert!(Sentence::from_tokens(vec!["ok".into(), String::new()]).is_err());
        assert!(Sentence::from_tokens(vec!["a b".into()]).is_err());
        assert!(Sentence::from_tokens(vec!["ok".into()]).is_ok());
    }

    #[test]
    fn entity_map_allocates_consecutively_per_category() {
        let mut m = EntityMap::new("s1");
        assert_eq!(
            m.allocate(vec!["Anna".into()], EntityCategory::Person),
            "PERSON@1"
        );
        assert_eq!(
            m.allocate(vec!["Berlin".into()], EntityCategory::Location),
            "LOCATION@1"
        );
        assert_eq!(
            m.allocate(vec!["Maria".into()], EntityCategory::Person),
            "PERSON@2"
        );
    }

    #[test]
    fn entity_map_sidecar_round_trip() {
        let mut m = EntityMap::new("story:0");
        m.allocate(vec!["Anna".into()], EntityCategory::Person);
        m.allocate(vec!["New".into(), "York".into()], EntityCategory::Location);
        let lines = m.to_sidecar_lines();
        let parsed =
            EntityMap::from_sidecar_lines("story:0", lines.iter().map(String::as_str)).unwrap();
        assert_eq!(parsed.entries(), m.entries());
    }

    #[test]
    fn sidecar_rejects_duplicate_placeholders() {
        let lines = ["s\tPERSON@1\tAnna", "s\tPERSON@1\tMaria"];
        let err = EntityMap::from_sidecar_lines("s", lines.iter().copied()).unwrap_err();
        assert!(err.to_string().contains("duplicate placeholder"), "{err}");
    }

    #[test]
    fn reserved_indices_shift_allocation() {
        let mut m = EntityMap::new("s");
        m.reserve_index(EntityCategory::Person, 4);
        assert_eq!(
            m.allocate(vec!["Oscar".into()], EntityCategory::Person),
            "PERSON@5"
        );
    }
}
