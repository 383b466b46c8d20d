//! `ornate preprocess`: tokenize, anonymize, pair.

use std::path::Path;

use ornate_core::corpus::{load_cct, split_cct, Granularity};
use ornate_core::textpipe::{
    anonymize, pair_sentences, save_sidecar, tokenize, EntityMap, GazetteerRecognizer, Sentence,
};

use crate::errors::{read_lines, write_file, CliError};
use crate::{FormatArg, ScopeArg};

pub struct Args<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub anonymize: bool,
    pub pairs: bool,
    pub scope: ScopeArg,
    pub format: FormatArg,
    pub gazetteer: Option<&'a Path>,
    pub entity_map: Option<&'a Path>,
    pub scopes: Option<&'a Path>,
    pub no_caps_heuristic: bool,
}

/// A group of sentences sharing one anonymization scope.
struct ScopedGroup {
    scope_id: String,
    sentences: Vec<Sentence>,
}

pub fn run(args: Args<'_>) -> Result<(), CliError> {
    let recognizer = match args.gazetteer {
        Some(path) => GazetteerRecognizer::from_file(path)?,
        None => GazetteerRecognizer::empty(),
    }
    .with_capitalization_heuristic(!args.no_caps_heuristic);

    let is_cct = match args.format {
        FormatArg::Cct => true,
        FormatArg::Plain => false,
        FormatArg::Auto => sniff_cct(args.input)?,
    };

    // Story-scoped groups; plain input is one scope ("file") unless the
    // scope is per output line.
    let mut groups: Vec<ScopedGroup> = if is_cct {
        let corpus = load_cct(args.input)?;
        split_cct(&corpus, Granularity::Story)
            .into_iter()
            .map(|u| ScopedGroup {
                scope_id: u.label,
                sentences: u.sentences,
            })
            .collect()
    } else {
        let sentences: Vec<Sentence> = read_lines(args.input)?
            .iter()
            .filter(|l| !l.trim().is_empty())
            .map(|l| tokenize(l))
            .collect();
        vec![ScopedGroup {
            scope_id: "file".to_string(),
            sentences,
        }]
    };
    let sentence_count: usize = groups.iter().map(|g| g.sentences.len()).sum();

    let mut maps: Vec<EntityMap> = Vec::new();
    if args.anonymize && args.scope == ScopeArg::Story {
        // anonymize before pairing, one numbering per story
        for group in &mut groups {
            let mut scope = EntityMap::new(group.scope_id.clone());
            group.sentences = group
                .sentences
                .iter()
                .map(|s| anonymize(s, &recognizer, &mut scope))
                .collect::<Result<_, _>>()?;
            maps.push(scope);
        }
    }

    // scope id per flattened sentence (before pairing)
    let mut flat: Vec<(String, Sentence)> = Vec::new();
    for group in groups {
        for s in group.sentences {
            flat.push((group.scope_id.clone(), s));
        }
    }

    let mut lines: Vec<(String, Sentence)> = if args.pairs {
        let sentences: Vec<Sentence> = flat.iter().map(|(_, s)| s.clone()).collect();
        let paired = pair_sentences(&sentences);
        paired
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                // a pair spans sentences 2i and 2i+1; keep the first one's
                // scope (pairs may cross scope boundaries by construction)
                (flat[2 * i].0.clone(), s)
            })
            .collect()
    } else {
        flat
    };

    if args.anonymize && args.scope == ScopeArg::Sentence {
        // one numbering per output line
        lines = lines
            .into_iter()
            .enumerate()
            .map(|(i, (_, s))| {
                let scope_id = (i + 1).to_string();
                let mut scope = EntityMap::new(scope_id.clone());
                let anon = anonymize(&s, &recognizer, &mut scope)?;
                if !scope.is_empty() {
                    maps.push(scope);
                }
                Ok::<_, CliError>((scope_id, anon))
            })
            .collect::<Result<_, _>>()?;
    }

    let mut out = String::new();
    let mut scope_lines = String::new();
    for (scope_id, s) in &lines {
        out.push_str(&s.to_line());
        out.push('\n');
        scope_lines.push_str(scope_id);
        scope_lines.push('\n');
    }
    write_file(args.output, &out)?;

    if args.anonymize {
        let map_path = args
            .entity_map
            .map(Path::to_path_buf)
            .unwrap_or_else(|| sidecar_path(args.output, "entities"));
        save_sidecar(&maps, &map_path)?;
        let scopes_path = args
            .scopes
            .map(Path::to_path_buf)
            .unwrap_or_else(|| sidecar_path(args.output, "scopes"));
        write_file(&scopes_path, &scope_lines)?;
        let entities: usize = maps.iter().map(EntityMap::len).sum();
        println!("entities: {entities} across {} scopes", maps.len());
    }

    println!("sentences: {sentence_count}");
    println!("lines written: {}", lines.len());
    Ok(())
}

fn sidecar_path(output: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    output.with_file_name(name)
}

fn sniff_cct(path: &Path) -> Result<bool, CliError> {
    let lines = read_lines(path)?;
    Ok(lines
        .iter()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.starts_with("#SYSTEM")))
}
