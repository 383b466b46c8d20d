//! Rule-based tokenizer and its inverse.
//!
//! The rule set is fixed so that tokenized output round-trips the bundled
//! fixture material: punctuation marks are split into separate tokens,
//! English clitics are split at the apostrophe, and anonymization
//! placeholders (`PERSON@1`, ...) are never taken apart.

use super::{is_placeholder, Sentence};

/// Punctuation units split into separate tokens. Multi-character units are
/// matched before single characters.
const PUNCT_MULTI: [&str; 2] = ["''", "``"];
const PUNCT_SINGLE: [char; 9] = ['.', ',', ':', ';', '!', '?', '(', ')', '"'];

/// Clitic suffixes split at the apostrophe (`n't` attaches the `n` too).
const CLITICS: [&str; 7] = ["n't", "'re", "'ve", "'ll", "'s", "'d", "'m"];

/// Whether a token is one of the punctuation units the tokenizer splits.
pub fn is_punctuation_token(tok: &str) -> bool {
    PUNCT_MULTI.contains(&tok)
        || (tok.chars().count() == 1 && PUNCT_SINGLE.contains(&tok.chars().next().unwrap()))
}

fn is_clitic_token(tok: &str) -> bool {
    CLITICS.iter().any(|c| tok.eq_ignore_ascii_case(c))
}

/// Strips one leading punctuation unit, if any.
fn peel_front(chunk: &str) -> Option<(&str, &str)> {
    for p in PUNCT_MULTI {
        if let Some(rest) = chunk.strip_prefix(p) {
            return Some((p, rest));
        }
    }
    let first = chunk.chars().next()?;
    if PUNCT_SINGLE.contains(&first) {
        return Some((&chunk[..first.len_utf8()], &chunk[first.len_utf8()..]));
    }
    None
}

/// Strips one trailing punctuation unit, if any.
fn peel_back(chunk: &str) -> Option<(&str, &str)> {
    for p in PUNCT_MULTI {
        if let Some(rest) = chunk.strip_suffix(p) {
            return Some((rest, p));
        }
    }
    let last = chunk.chars().next_back()?;
    if PUNCT_SINGLE.contains(&last) {
        let cut = chunk.len() - last.len_utf8();
        return Some((&chunk[..cut], &chunk[cut..]));
    }
    None
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut head: Vec<String> = Vec::new();
    let mut tail: Vec<String> = Vec::new();
    let mut core = chunk;
    loop {
        if core.is_empty() {
            break;
        }
        if let Some((p, rest)) = peel_front(core) {
            head.push(p.to_string());
            core = rest;
            continue;
        }
        if let Some((rest, p)) = peel_back(core) {
            tail.push(p.to_string());
            core = rest;
            continue;
        }
        break;
    }
    out.extend(head);
    if !core.is_empty() {
        if is_placeholder(core) {
            out.push(core.to_string());
        } else {
            let lower = core.to_ascii_lowercase();
            let clitic = CLITICS.iter().find_map(|c| {
                let cut = lower.len().checked_sub(c.len())?;
                // A clitic needs a host: never split the whole chunk.
                (cut > 0 && lower.is_char_boundary(cut) && &lower[cut..] == *c).then_some(cut)
            });
            match clitic {
                Some(cut) => {
                    out.push(core[..cut].to_string());
                    out.push(core[cut..].to_string());
                }
                None => out.push(core.to_string()),
            }
        }
    }
    out.extend(tail.into_iter().rev());
}

/// Tokenizes raw text. Empty input yields an empty sentence.
pub fn tokenize(raw: &str) -> Sentence {
    let mut tokens = Vec::new();
    for chunk in raw.split_whitespace() {
        split_chunk(chunk, &mut tokens);
    }
    Sentence::with_raw(tokens, raw.to_string())
}

/// Joins tokens back into running text.
///
/// Punctuation and clitics are reattached to the preceding word; opening
/// brackets and opening quotes attach to the following word. Quote tokens
/// (`''`, ` `` `, `"`) are paired by order of appearance within the
/// sentence: odd occurrences open, even occurrences close.
pub fn detokenize(s: &Sentence) -> String {
    let mut text = String::new();
    let mut glue_next = false; // previous token suppresses the following space
    let mut quote_open = std::collections::HashMap::new();
    for (i, tok) in s.tokens().iter().enumerate() {
        let quote_is_opening = if tok == "''" || tok == "``" || tok == "\"" {
            let state = quote_open
                .entry(if tok == "``" { "''" } else { tok.as_str() })
                .or_insert(false);
            *state = !*state;
            // `` always opens; '' and " alternate.
            tok == "``" || *state
        } else {
            false
        };

        let no_space_before = matches!(tok.as_str(), "." | "," | ":" | ";" | "!" | "?" | ")")
            || is_clitic_token(tok)
            || ((tok == "''" || tok == "\"") && !quote_is_opening);
        let first = i == 0;
        if !first && !glue_next && !no_space_before {
            text.push(' ');
        }
        text.push_str(tok);
        glue_next = tok == "(" || ((tok == "''" || tok == "``" || tok == "\"") && quote_is_opening);
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(raw: &str) -> Vec<String> {
        tokenize(raw).tokens().to_vec()
    }

    #[test]
    fn splits_clitics() {
        assert_eq!(toks("You're fired"), ["You", "'re", "fired"]);
        assert_eq!(toks("don't"), ["do", "n't"]);
        assert_eq!(toks("she'll"), ["she", "'ll"]);
        assert_eq!(toks("I'm"), ["I", "'m"]);
        assert_eq!(toks("he'd've"), ["he'd", "'ve"]);
    }

    #[test]
    fn empty_input_is_empty_sentence() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
    }

    #[test]
    fn raw_text_is_retained() {
        assert_eq!(tokenize("You're fired").raw(), Some("You're fired"));
        // synthesized sentences carry no raw text
        let s = tokenize("a b").concat(&tokenize("c d"));
        assert_eq!(s.raw(), None);
    }

    #[test]
    fn splits_punctuation() {
        assert_eq!(
            toks("PERSON@1 saw the affair."),
            ["PERSON@1", "saw", "the", "affair", "."]
        );
        assert_eq!(toks("hello, world!"), ["hello", ",", "world", "!"]);
        assert_eq!(toks("(wait)"), ["(", "wait", ")"]);
        assert_eq!(
            toks("said: ''Get out!''"),
            ["said", ":", "''", "Get", "out", "!", "''"]
        );
    }

    #[test]
    fn placeholders_survive_intact() {
        assert_eq!(toks("LOCATION@1's"), ["LOCATION@1", "'s"]);
        assert_eq!(toks("toward LOCATION@12."), ["toward", "LOCATION@12", "."]);
    }

    #[test]
    fn interior_periods_stay_put() {
        // Edge peeling keeps decimals and similar intact.
        assert_eq!(toks("a 3.55 score"), ["a", "3.55", "score"]);
    }

    #[test]
    fn detokenize_inverts_tokenize_on_plain_text() {
        for raw in [
            "You're fired",
            "hello.",
            "PERSON@1 saw the affair.",
            "She paid PERSON@2 what she owed.",
            "What do you think? Can they mend it?",
            "a (quiet) word, then",
        ] {
            assert_eq!(detokenize(&tokenize(raw)), raw);
        }
    }

    #[test]
    fn detokenize_trivia() {
        assert_eq!(detokenize(&Sentence::from_tokens(vec![]).unwrap()), "");
        let s = Sentence::from_tokens(vec!["hello".into(), ".".into()]).unwrap();
        assert_eq!(detokenize(&s), "hello.");
    }

    #[test]
    fn quote_pairing_round_trips() {
        let raw = "She said: ''PERSON@2 was a real suck-up to aristocratic PERSON@3.''";
        let sent = tokenize(raw);
        assert_eq!(
            sent.to_line(),
            "She said : '' PERSON@2 was a real suck-up to aristocratic PERSON@3 . ''"
        );
        assert_eq!(detokenize(&sent), raw);
    }

    #[test]
    fn token_round_trip_on_tokenized_lines() {
        // Lines already in tokenized form re-tokenize to the same tokens
        // after detokenization, even with unpaired quotes.
        for line in [
            "You 're fired '' said PERSON@1 .",
            "She was very disappointed in her , so '' Get out !",
            "PERSON@1 said : '' Dolores wrote propaganda to promote your cause . ''",
        ] {
            let sent = Sentence::from_tokenized_line(line);
            let again = tokenize(&detokenize(&sent));
            assert_eq!(again.tokens(), sent.tokens());
        }
    }
}
