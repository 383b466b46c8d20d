//! `ornate report`: classification statistics for embellished output.

use std::path::Path;

use ornate_core::eval::{report, ClassifyConfig, ReportInput};
use ornate_core::textpipe::Sentence;

use crate::errors::{read_lines, write_file, CliError};
use crate::ModeArg;

pub fn run(
    input: &Path,
    output_embellished: &Path,
    mode: ModeArg,
    out: Option<&Path>,
    substitution_overlap: f64,
    first_kept_overlap: f64,
) -> Result<(), CliError> {
    let inputs: Vec<Sentence> = read_lines(input)?
        .iter()
        .map(|l| Sentence::from_tokenized_line(l))
        .collect();
    let outputs: Vec<Sentence> = read_lines(output_embellished)?
        .iter()
        .map(|l| Sentence::from_tokenized_line(l))
        .collect();

    let report_input = match mode {
        ModeArg::Sentence => ReportInput::Sentences(inputs),
        ModeArg::Pair => {
            // pair mode reads the unpaired sentence file and forms the
            // stride-2 pairs itself so both members are known; an odd
            // trailing sentence pairs with an empty second member
            let mut pairs = Vec::with_capacity(inputs.len().div_ceil(2));
            for chunk in inputs.chunks(2) {
                match chunk {
                    [a, b] => pairs.push((a.clone(), b.clone())),
                    [a] => pairs.push((a.clone(), Sentence::from_tokens(vec![]).unwrap())),
                    _ => unreachable!(),
                }
            }
            ReportInput::Pairs(pairs)
        }
    };

    let cfg = ClassifyConfig {
        substitution_overlap,
        first_kept_overlap,
    };
    let result = report(&report_input, &outputs, &cfg)?;
    print!("{}", result.to_text());

    if let Some(prefix) = out {
        let txt = prefix.with_extension("txt");
        let json = prefix.with_extension("json");
        write_file(&txt, &result.to_text())?;
        write_file(&json, &result.to_json())?;
    }
    Ok(())
}
