//! Frequency-ranked token table with reserved special tokens.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Sentence, TextError};

/// Special token ids. They occupy ids 0–3 and are never evicted.
pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

const SPECIALS: [&str; 4] = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];

/// Default cap on the vocabulary size (special tokens included).
pub const DEFAULT_MAX_SIZE: usize = 50_000;

/// Bijective token ↔ id table, ids assigned by descending corpus frequency
/// with ties broken by first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, u32>,
    token_of: Vec<String>,
    max_size: usize,
}

impl Vocabulary {
    fn with_specials(max_size: usize) -> Self {
        let token_of: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            id_of,
            token_of,
            max_size,
        }
    }

    /// Id for `token`, falling back to `UNK_ID` for out-of-vocabulary tokens.
    pub fn id_of(&self, token: &str) -> u32 {
        self.id_of.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Whether `token` has its own id (i.e. is not mapped to UNK).
    pub fn contains(&self, token: &str) -> bool {
        self.id_of.contains_key(token)
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.token_of.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.token_of.iter().map(String::as_str)
    }

    /// FNV-1a hash over the id-ordered token list; used to tie checkpoints
    /// to the vocabulary they were trained with.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.token_of {
            for b in t.as_bytes() {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= u64::from(b'\n');
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Writes one token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        let io = |source| TextError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for t in &self.token_of {
            writeln!(f, "{t}").map_err(io)?;
        }
        f.flush().map_err(io)?;
        Ok(())
    }

    /// Loads a vocabulary file, verifying the special tokens on lines 0–3.
    pub fn load(path: &Path) -> Result<Self, TextError> {
        let io = |source| TextError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io)?;
        let mut token_of = Vec::new();
        let mut id_of = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if i < SPECIALS.len() && line != SPECIALS[i] {
                return Err(TextError::BadLine {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: format!("expected special token {:?}, found {line:?}", SPECIALS[i]),
                });
            }
            if line.is_empty() || line.contains(char::is_whitespace) {
                return Err(TextError::BadLine {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: format!("invalid vocabulary token {line:?}"),
                });
            }
            if id_of.insert(line.clone(), i as u32).is_some() {
                return Err(TextError::BadLine {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: format!("duplicate token {line:?}"),
                });
            }
            token_of.push(line);
        }
        if token_of.len() < SPECIALS.len() {
            return Err(TextError::BadLine {
                path: path.display().to_string(),
                line: token_of.len(),
                reason: "vocabulary file is missing the special tokens".into(),
            });
        }
        let max_size = token_of.len().max(DEFAULT_MAX_SIZE);
        Ok(Self {
            id_of,
            token_of,
            max_size,
        })
    }
}

/// Builds a vocabulary from a corpus: specials at ids 0–3, the remaining
/// slots filled by descending frequency, ties broken by first occurrence.
/// Deterministic for a fixed corpus.
pub fn build_vocabulary<'a>(
    corpus: impl IntoIterator<Item = &'a Sentence>,
    max_size: usize,
) -> Result<Vocabulary, TextError> {
    if max_size < 5 {
        return Err(TextError::VocabTooSmall { max_size });
    }
    let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
    let mut order = 0usize;
    for sent in corpus {
        for tok in sent.tokens() {
            if SPECIALS.contains(&tok.as_str()) {
                continue;
            }
            let entry = counts.entry(tok).or_insert((0, order));
            entry.0 += 1;
            order += 1;
        }
    }
    let mut ranked: Vec<(&str, (u64, usize))> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));

    let mut vocab = Vocabulary::with_specials(max_size);
    for (tok, _) in ranked
        .into_iter()
        .take(max_size.saturating_sub(SPECIALS.len()))
    {
        let id = vocab.token_of.len() as u32;
        vocab.id_of.insert(tok.to_string(), id);
        vocab.token_of.push(tok.to_string());
    }
    Ok(vocab)
}

/// Encodes a sentence as `BOS + token ids + EOS`, mapping out-of-vocabulary
/// tokens to UNK.
pub fn encode(s: &Sentence, v: &Vocabulary) -> Vec<u32> {
    let mut ids = Vec::with_capacity(s.len() + 2);
    ids.push(BOS_ID);
    ids.extend(s.tokens().iter().map(|t| v.id_of(t)));
    ids.push(EOS_ID);
    ids
}

/// Decodes an id sequence back to tokens, stripping BOS/EOS/PAD. The inverse
/// of [`encode`] for fully in-vocabulary sentences.
pub fn decode_ids(ids: &[u32], v: &Vocabulary) -> Result<Sentence, TextError> {
    let mut tokens = Vec::with_capacity(ids.len());
    for (position, &id) in ids.iter().enumerate() {
        if matches!(id, PAD_ID | BOS_ID | EOS_ID) {
            continue;
        }
        match v.token_of(id) {
            Some(tok) => tokens.push(tok.to_string()),
            None => {
                return Err(TextError::IdOutOfRange {
                    id,
                    position,
                    vocab_size: v.len(),
                })
            }
        }
    }
    Ok(Sentence::from_tokens_unchecked(tokens))
}
