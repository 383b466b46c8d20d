//! Pairing of consecutive sentences for the pair-based task.

use super::Sentence;

/// Concatenates consecutive sentences two at a time (stride 2, in order):
/// `out[i] = sents[2i] ⊕ sents[2i+1]`. An odd trailing sentence is passed
/// through unpaired, so the output length is `⌈n/2⌉`.
pub fn pair_sentences(sents: &[Sentence]) -> Vec<Sentence> {
    sents
        .chunks(2)
        .map(|pair| match pair {
            [a, b] => a.concat(b),
            [a] => a.clone(),
            _ => unreachable!(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(line: &str) -> Sentence {
        Sentence::from_tokenized_line(line)
    }

    #[test]
    fn pairs_with_stride_two() {
        let s = [sent("a ."), sent("b ."), sent("c ."), sent("d .")];
        let out = pair_sentences(&s);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], sent("a . b ."));
        assert_eq!(out[1], sent("c . d ."));
    }

    #[test]
    fn odd_trailing_sentence_kept() {
        let s = [sent("only one")];
        assert_eq!(pair_sentences(&s), s);
        let s3 = [sent("a"), sent("b"), sent("c")];
        let out = pair_sentences(&s3);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1], sent("c"));
    }

    #[test]
    fn empty_input() {
        assert!(pair_sentences(&[]).is_empty());
    }
}
