//! `ornate embellish`: decode a corpus through a trained model.

use std::path::{Path, PathBuf};

use ornate_core::eval::{embellish, DecodeConfig, DecodeMode, UnkPolicy};
use ornate_core::neural::{vocab_hash, Model, Scalar};
use ornate_core::textpipe::{deanonymize, load_sidecar, EntityMap, Sentence, Vocabulary};
use ornate_core::training::{load_checkpoint_any, LoadedCheckpoint};

use crate::errors::{read_lines, write_file, CliError};
use crate::{Cli, Command, UnkPolicyArg};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let Command::Embellish {
        input,
        output,
        checkpoint,
        vocab,
        beam,
        max_length,
        unk_policy,
        deanonymize: do_deanonymize,
        entity_map,
        scopes,
    } = &cli.command
    else {
        unreachable!("dispatched on the embellish subcommand");
    };

    let vocabulary = Vocabulary::load(vocab)?;
    let sentences: Vec<Sentence> = read_lines(input)?
        .iter()
        .map(|l| Sentence::from_tokenized_line(l))
        .collect();

    let dc = DecodeConfig {
        mode: if beam.is_some() {
            DecodeMode::Beam
        } else {
            DecodeMode::Greedy
        },
        beam_size: beam.unwrap_or(5),
        max_output_length: *max_length,
        unk_policy: match unk_policy {
            UnkPolicyArg::Keep => UnkPolicy::Keep,
            UnkPolicyArg::Copy => UnkPolicy::CopySourceArgmaxAttention,
        },
    };
    dc.validate()?;

    let vhash = vocab_hash(&vocabulary);
    let mut outputs = match load_checkpoint_any(checkpoint)? {
        LoadedCheckpoint::F32(ckpt) => {
            ckpt.verify_vocab_hash(vhash)?;
            decode_corpus(&ckpt.model, &sentences, &vocabulary, &dc, cli.jobs)?
        }
        LoadedCheckpoint::F64(ckpt) => {
            ckpt.verify_vocab_hash(vhash)?;
            decode_corpus(&ckpt.model, &sentences, &vocabulary, &dc, cli.jobs)?
        }
    };

    let empty = outputs.iter().filter(|s| s.is_empty()).count();
    if empty > 0 {
        eprintln!("warning: {empty} empty decodes");
    }

    if *do_deanonymize {
        let map_path = entity_map
            .clone()
            .unwrap_or_else(|| sidecar_path(input, "entities"));
        let maps = load_sidecar(&map_path)?;
        let scope_ids = scope_ids_for(input, scopes.as_deref(), outputs.len())?;
        let mut missing_total = 0usize;
        outputs = outputs
            .iter()
            .zip(&scope_ids)
            .map(|(s, scope_id)| {
                let map = maps
                    .iter()
                    .find(|m| m.scope_id() == scope_id)
                    .cloned()
                    .unwrap_or_else(|| EntityMap::new(scope_id.clone()));
                let (restored, missing) = deanonymize(s, &map);
                missing_total += missing.len();
                restored
            })
            .collect();
        if missing_total > 0 {
            eprintln!("warning: {missing_total} placeholders had no sidecar entry");
        }
    }

    let mut content = String::new();
    for s in &outputs {
        content.push_str(&s.to_line());
        content.push('\n');
    }
    write_file(output, &content)?;
    println!("decoded {} sentences", outputs.len());
    Ok(())
}

/// Per-line scope ids: the explicit file, the input's `.scopes` sidecar, or
/// 1-based line numbers.
fn scope_ids_for(input: &Path, scopes: Option<&Path>, n: usize) -> Result<Vec<String>, CliError> {
    let path = match scopes {
        Some(p) => Some(p.to_path_buf()),
        None => {
            let default = sidecar_path(input, "scopes");
            default.exists().then_some(default)
        }
    };
    match path {
        Some(p) => {
            let lines = read_lines(&p)?;
            if lines.len() != n {
                return Err(CliError::Data(format!(
                    "{}: {} scope lines for {} sentences",
                    p.display(),
                    lines.len(),
                    n
                )));
            }
            Ok(lines)
        }
        None => Ok((1..=n).map(|i| i.to_string()).collect()),
    }
}

fn sidecar_path(input: &Path, suffix: &str) -> PathBuf {
    let mut name = input.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    input.with_file_name(name)
}

/// Decodes the corpus, optionally across worker threads; results merge by
/// input index so the output order is deterministic.
fn decode_corpus<F: Scalar>(
    model: &Model<F>,
    sentences: &[Sentence],
    vocabulary: &Vocabulary,
    dc: &DecodeConfig,
    jobs: usize,
) -> Result<Vec<Sentence>, CliError> {
    let jobs = jobs.max(1).min(sentences.len().max(1));
    if jobs == 1 {
        return sentences
            .iter()
            .map(|s| embellish(s, model, vocabulary, dc).map_err(Into::into))
            .collect();
    }

    let chunk_size = sentences.len().div_ceil(jobs);
    let mut results: Vec<Option<Result<Vec<Sentence>, CliError>>> = Vec::new();
    results.resize_with(jobs, || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (i, chunk) in sentences.chunks(chunk_size).enumerate() {
            handles.push((
                i,
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|s| embellish(s, model, vocabulary, dc).map_err(CliError::from))
                        .collect::<Result<Vec<Sentence>, CliError>>()
                }),
            ));
        }
        for (i, handle) in handles {
            results[i] = Some(handle.join().expect("decode worker panicked"));
        }
    });

    let mut out = Vec::with_capacity(sentences.len());
    for r in results.into_iter().flatten() {
        out.extend(r?);
    }
    Ok(out)
}
