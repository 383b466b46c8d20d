//! `ornate score`: corpus BLEU of hypothesis vs. reference.

use std::path::Path;

use ornate_core::eval::bleu_with_options;
use ornate_core::textpipe::Sentence;

use crate::errors::{read_lines, write_file, CliError};

pub fn run(
    hypothesis: &Path,
    reference: &Path,
    json: Option<&Path>,
    smooth: bool,
) -> Result<(), CliError> {
    let hyps: Vec<Sentence> = read_lines(hypothesis)?
        .iter()
        .map(|l| Sentence::from_tokenized_line(l))
        .collect();
    let refs: Vec<Sentence> = read_lines(reference)?
        .iter()
        .map(|l| Sentence::from_tokenized_line(l))
        .collect();
    let score = bleu_with_options(&hyps, &refs, 4, smooth)?;

    println!("BLEU = {:.2}", score.score);
    println!(
        "precisions = {:.1}/{:.1}/{:.1}/{:.1}  BP = {:.3}  lengths = {}/{}",
        100.0 * score.precisions[0],
        100.0 * score.precisions[1],
        100.0 * score.precisions[2],
        100.0 * score.precisions[3],
        score.brevity_penalty,
        score.hypothesis_length,
        score.reference_length,
    );
    if let Some(path) = json {
        write_file(path, &score.to_json())?;
    }
    Ok(())
}
