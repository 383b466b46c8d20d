//! `ornate cct`: story-corpus inspection, validation and assembly.

use std::path::Path;

use ornate_core::corpus::{
    assemble_from_dir, format_cct, load_cct, make_pair_units, split_cct, validate_manifest,
    CctManifest, Granularity,
};

use crate::errors::{write_file, CliError};
use crate::GranularityArg;

pub fn run(
    path: &Path,
    granularity: Option<GranularityArg>,
    out: Option<&Path>,
    manifest: Option<&Path>,
    from_dir: Option<&Path>,
    pairs: bool,
) -> Result<(), CliError> {
    if let Some(dir) = from_dir {
        let corpus = assemble_from_dir(dir)?;
        write_file(path, &format_cct(&corpus))?;
        println!("assembled {} from {}", path.display(), dir.display());
    }

    let corpus = load_cct(path)?;
    let counts = corpus.counts();
    println!(
        "systems: {}  stories: {}  paragraphs: {}  sentences: {}",
        counts.systems, counts.stories, counts.paragraphs, counts.sentences
    );

    if let Some(manifest_path) = manifest {
        let manifest = CctManifest::load(manifest_path)?;
        validate_manifest(&corpus, &manifest)?;
        println!("manifest ok");
    }

    if let Some(g) = granularity {
        let g = match g {
            GranularityArg::System => Granularity::System,
            GranularityArg::Story => Granularity::Story,
            GranularityArg::Paragraph => Granularity::Paragraph,
            GranularityArg::Sentence => Granularity::Sentence,
        };
        let units = split_cct(&corpus, g);
        println!("units: {}", units.len());
        if let Some(out_path) = out {
            let mut content = String::new();
            for unit in &units {
                let joined: Vec<String> = unit.sentences.iter().map(|s| s.to_line()).collect();
                content.push_str(&joined.join(" "));
                content.push('\n');
            }
            write_file(out_path, &content)?;
        }
    }

    if pairs {
        let units = make_pair_units(&corpus);
        println!("pair units: {}", units.len());
        if granularity.is_none() {
            if let Some(out_path) = out {
                let content: String = units.iter().map(|s| s.to_line() + "\n").collect();
                write_file(out_path, &content)?;
            }
        }
    }
    Ok(())
}
