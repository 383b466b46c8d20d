//! Aggregated embellishment reports: per-class counts, percentages, corpus
//! BLEU of outputs against inputs, and exemplar diffs.

use serde::Serialize;

use super::bleu::{bleu, BleuScore};
use super::classify::{
    classify_output, classify_pair_output, ClassifyConfig, OutputClass, PairClass,
};
use super::EvalError;
use crate::textpipe::Sentence;

const EXEMPLARS_PER_CLASS: usize = 3;

/// Inputs of a report: plain sentences, or the pre-concatenation pairs of
/// the pair-based task.
#[derive(Debug, Clone)]
pub enum ReportInput {
    Sentences(Vec<Sentence>),
    Pairs(Vec<(Sentence, Sentence)>),
}

impl ReportInput {
    pub fn len(&self) -> usize {
        match self {
            ReportInput::Sentences(v) => v.len(),
            ReportInput::Pairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The comparison side for BLEU: pair inputs are their concatenation.
    fn as_reference(&self, i: usize) -> Sentence {
        match self {
            ReportInput::Sentences(v) => v[i].clone(),
            ReportInput::Pairs(v) => v[i].0.concat(&v[i].1),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassStat {
    pub class: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
    pub class: String,
}

/// The aggregated report for one evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct EmbellishmentReport {
    pub mode: String,
    pub total: usize,
    pub classes: Vec<ClassStat>,
    /// Corpus BLEU of the outputs against the inputs (how literally the
    /// corpus was reproduced).
    pub bleu_vs_input: BleuScore,
    pub exemplars: Vec<Exemplar>,
}

impl EmbellishmentReport {
    pub fn count_of(&self, class: &str) -> usize {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .map_or(0, |c| c.count)
    }

    pub fn percent_of(&self, class: &str) -> f64 {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .map_or(0.0, |c| c.percent)
    }

    /// Human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("mode: {}\noutputs: {}\n", self.mode, self.total));
        for c in &self.classes {
            out.push_str(&format!(
                "{:<22} {:>6}  {:>6.2}%\n",
                c.class, c.count, c.percent
            ));
        }
        out.push_str(&format!(
            "BLEU vs input: {:.2} (BP {:.3}, {} vs {} tokens)\n",
            self.bleu_vs_input.score,
            self.bleu_vs_input.brevity_penalty,
            self.bleu_vs_input.hypothesis_length,
            self.bleu_vs_input.reference_length
        ));
        if !self.exemplars.is_empty() {
            out.push_str("exemplars:\n");
            for e in &self.exemplars {
                out.push_str(&format!(
                    "  [{}]\n    in:  {}\n    out: {}\n",
                    e.class, e.input, e.output
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Classifies every output against its input, aggregates counts and
/// percentages, and scores corpus BLEU of outputs vs. inputs.
pub fn report(
    inputs: &ReportInput,
    outputs: &[Sentence],
    cfg: &ClassifyConfig,
) -> Result<EmbellishmentReport, EvalError> {
    if inputs.is_empty() || outputs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    if inputs.len() != outputs.len() {
        return Err(EvalError::LengthMismatch {
            hyps: outputs.len(),
            refs: inputs.len(),
        });
    }

    let total = outputs.len();
    let mut exemplars = Vec::new();
    let mut classes: Vec<ClassStat> = Vec::new();
    let push = |class: &str, label_counts: &mut std::collections::BTreeMap<String, usize>| {
        *label_counts.entry(class.to_string()).or_insert(0) += 1;
    };
    let mut counts = std::collections::BTreeMap::new();
    let mut per_class_exemplars: std::collections::BTreeMap<String, usize> = Default::default();

    let mode = match inputs {
        ReportInput::Sentences(sents) => {
            for (input, output) in sents.iter().zip(outputs) {
                let class = classify_output(input, output, cfg);
                push(class.as_str(), &mut counts);
                let taken = per_class_exemplars
                    .entry(class.as_str().to_string())
                    .or_insert(0);
                if *taken < EXEMPLARS_PER_CLASS && class != OutputClass::Reproduction {
                    exemplars.push(Exemplar {
                        input: input.to_line(),
                        output: output.to_line(),
                        class: class.as_str().to_string(),
                    });
                    *taken += 1;
                }
            }
            for class in OutputClass::ALL {
                let count = counts.get(class.as_str()).copied().unwrap_or(0);
                classes.push(ClassStat {
                    class: class.as_str().to_string(),
                    count,
                    percent: 100.0 * count as f64 / total as f64,
                });
            }
            "sentence"
        }
        ReportInput::Pairs(pairs) => {
            for ((first, second), output) in pairs.iter().zip(outputs) {
                let class = classify_pair_output((first, second), output, cfg);
                push(class.as_str(), &mut counts);
                let taken = per_class_exemplars
                    .entry(class.as_str().to_string())
                    .or_insert(0);
                if *taken < EXEMPLARS_PER_CLASS {
                    exemplars.push(Exemplar {
                        input: first.concat(second).to_line(),
                        output: output.to_line(),
                        class: class.as_str().to_string(),
                    });
                    *taken += 1;
                }
            }
            for class in PairClass::ALL {
                let count = counts.get(class.as_str()).copied().unwrap_or(0);
                classes.push(ClassStat {
                    class: class.as_str().to_string(),
                    count,
                    percent: 100.0 * count as f64 / total as f64,
                });
            }
            "pair"
        }
    };

    let references: Vec<Sentence> = (0..total).map(|i| inputs.as_reference(i)).collect();
    let bleu_vs_input = bleu(outputs, &references, 4)?;

    Ok(EmbellishmentReport {
        mode: mode.to_string(),
        total,
        classes,
        bleu_vs_input,
        exemplars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(line: &str) -> Sentence {
        Sentence::from_tokenized_line(line)
    }

    #[test]
    fn constructed_sentence_report_hits_designed_percentages() {
        // 8 reproductions, 1 substitution, 1 unrelated → 80/10/0/10
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for i in 0..8 {
            let s = sent(&format!("sentence number w{i} stays the same ."));
            inputs.push(s.clone());
            outputs.push(s);
        }
        inputs.push(sent("PERSON@1 was bossy ."));
        outputs.push(sent("PERSON@1 was overbearing ."));
        inputs.push(sent("the moon rose over the hill ."));
        outputs.push(sent("quantum flux inverts tachyon"));

        let r = report(
            &ReportInput::Sentences(inputs),
            &outputs,
            &ClassifyConfig::default(),
        )
        .unwrap();
        assert_eq!(r.total, 10);
        assert_eq!(r.percent_of("reproduction"), 80.0);
        assert_eq!(r.percent_of("lexical_substitution"), 10.0);
        assert_eq!(r.percent_of("missing_words"), 0.0);
        assert_eq!(r.percent_of("unrelated"), 10.0);
        let percent_sum: f64 = r.classes.iter().map(|c| c.percent).sum();
        assert!((percent_sum - 100.0).abs() < 0.01);
        let count_sum: usize = r.classes.iter().map(|c| c.count).sum();
        assert_eq!(count_sum, r.total);
    }

    #[test]
    fn pair_report_classifies_the_examples() {
        let pairs = vec![
            (
                sent("PERSON@1 saw the affair ."),
                sent("PERSON@1 was jealous"),
            ),
            (sent("the cat sat ."), sent("a dog barked loudly .")),
        ];
        let outputs = vec![
            sent("PERSON@1 was jealous of the affair"),
            sent("the cat sat ."),
        ];
        let r = report(
            &ReportInput::Pairs(pairs),
            &outputs,
            &ClassifyConfig::default(),
        )
        .unwrap();
        assert_eq!(r.mode, "pair");
        assert_eq!(r.count_of("combined"), 1);
        assert_eq!(r.count_of("first_kept"), 1);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        let empty = ReportInput::Sentences(vec![]);
        assert!(matches!(
            report(&empty, &[], &ClassifyConfig::default()),
            Err(EvalError::EmptyCorpus)
        ));
        let one = ReportInput::Sentences(vec![sent("a")]);
        assert!(matches!(
            report(&one, &[sent("a"), sent("b")], &ClassifyConfig::default()),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn identity_outputs_score_bleu_100() {
        let sents: Vec<Sentence> = (0..3).map(|i| sent(&format!("line w{i} here ."))).collect();
        let r = report(
            &ReportInput::Sentences(sents.clone()),
            &sents,
            &ClassifyConfig::default(),
        )
        .unwrap();
        assert_eq!(r.bleu_vs_input.score, 100.0);
        assert_eq!(r.count_of("reproduction"), 3);
    }

    #[test]
    fn report_serializes_both_ways() {
        let sents = vec![sent("a b c .")];
        let r = report(
            &ReportInput::Sentences(sents.clone()),
            &sents,
            &ClassifyConfig::default(),
        )
        .unwrap();
        assert!(r.to_text().contains("reproduction"));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["total"], 1);
    }
}
