//! `ornate build-vocab`: frequency-ranked token table from tokenized files.

use std::path::{Path, PathBuf};

use ornate_core::textpipe::{build_vocabulary, Sentence};

use crate::errors::{read_lines, CliError};

pub fn run(inputs: &[PathBuf], output: &Path, max_size: usize) -> Result<(), CliError> {
    let mut sentences = Vec::new();
    for path in inputs {
        for line in read_lines(path)? {
            if !line.trim().is_empty() {
                sentences.push(Sentence::from_tokenized_line(&line));
            }
        }
    }
    let vocab = build_vocabulary(&sentences, max_size)?;
    vocab.save(output)?;
    println!("vocabulary size: {}", vocab.len());
    Ok(())
}
