//! The hierarchical story corpus: system → story → paragraph → sentence.
//!
//! On-disk marker format (one canonical internal format):
//!
//! ```text
//! #SYSTEM<TAB>name
//! ##STORY<TAB>title
//! ###PARAGRAPH
//! one tokenized sentence per line
//! ```
//!
//! Blank lines are ignored. An adapter ([`assemble_from_dir`]) converts a
//! plain directory tree (one subdirectory per system, one `.txt` file per
//! story, blank-line-separated paragraphs) into this format.

use std::io::BufRead;
use std::path::Path;

use super::CorpusError;
use crate::textpipe::{pair_sentences, Sentence};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CctParagraph {
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CctStory {
    pub title: String,
    pub paragraphs: Vec<CctParagraph>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CctSystem {
    pub name: String,
    pub stories: Vec<CctStory>,
}

/// The full story corpus, strictly nested.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CctCorpus {
    pub systems: Vec<CctSystem>,
}

/// Unit counts at every level of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CctCounts {
    pub systems: usize,
    pub stories: usize,
    pub paragraphs: usize,
    pub sentences: usize,
}

impl CctCorpus {
    pub fn counts(&self) -> CctCounts {
        let mut c = CctCounts {
            systems: self.systems.len(),
            stories: 0,
            paragraphs: 0,
            sentences: 0,
        };
        for sys in &self.systems {
            c.stories += sys.stories.len();
            for story in &sys.stories {
                c.paragraphs += story.paragraphs.len();
                for p in &story.paragraphs {
                    c.sentences += p.sentences.len();
                }
            }
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }
}

/// Granularity at which the corpus can be flattened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    System,
    Story,
    Paragraph,
    Sentence,
}

impl Granularity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "system" => Some(Self::System),
            "story" => Some(Self::Story),
            "paragraph" => Some(Self::Paragraph),
            "sentence" => Some(Self::Sentence),
            _ => None,
        }
    }
}

/// One flattened text unit: a label identifying its position in the
/// hierarchy plus the sentences it spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CctUnit {
    pub label: String,
    pub sentences: Vec<Sentence>,
}

/// Parses the marker format.
pub fn load_cct(path: &Path) -> Result<CctCorpus, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    parse_cct(BufReader::new(file), &path.display().to_string())
}

use std::io::BufReader;

fn parse_cct(reader: impl BufRead, path: &str) -> Result<CctCorpus, CorpusError> {
    let mut corpus = CctCorpus::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_string(),
            source,
        })?;
        let line_no = i + 1;
        let bad = |reason: String| CorpusError::BadMarker {
            path: path.to_string(),
            line: line_no,
            reason,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("###") {
            if rest != "PARAGRAPH" {
                return Err(bad(format!("unknown marker {:?}", line.trim())));
            }
            let story = corpus
                .systems
                .last_mut()
                .and_then(|s| s.stories.last_mut())
                .ok_or_else(|| bad("###PARAGRAPH outside of a story".into()))?;
            story.paragraphs.push(CctParagraph::default());
        } else if let Some(rest) = line.strip_prefix("##") {
            if !rest.starts_with("STORY") {
                return Err(bad(format!("unknown marker {:?}", line.trim())));
            }
            let title = rest
                .strip_prefix("STORY")
                .and_then(|r| r.strip_prefix('\t'))
                .unwrap_or("")
                .to_string();
            let system = corpus
                .systems
                .last_mut()
                .ok_or_else(|| bad("##STORY outside of a system".into()))?;
            system.stories.push(CctStory {
                title,
                paragraphs: Vec::new(),
            });
        } else if let Some(rest) = line.strip_prefix('#') {
            if !rest.starts_with("SYSTEM") {
                return Err(bad(format!("unknown marker {:?}", line.trim())));
            }
            let name = rest
                .strip_prefix("SYSTEM")
                .and_then(|r| r.strip_prefix('\t'))
                .unwrap_or("")
                .to_string();
            corpus.systems.push(CctSystem {
                name,
                stories: Vec::new(),
            });
        } else {
            let paragraph = corpus
                .systems
                .last_mut()
                .and_then(|s| s.stories.last_mut())
                .and_then(|s| s.paragraphs.last_mut())
                .ok_or_else(|| bad("sentence outside of a paragraph".into()))?;
            paragraph
                .sentences
                .push(Sentence::from_tokenized_line(&line));
        }
    }
    Ok(corpus)
}

/// Serializes the corpus back to the marker format.
pub fn format_cct(c: &CctCorpus) -> String {
    let mut out = String::new();
    for sys in &c.systems {
        out.push_str(&format!("#SYSTEM\t{}\n", sys.name));
        for story in &sys.stories {
            out.push_str(&format!("##STORY\t{}\n", story.title));
            for p in &story.paragraphs {
                out.push_str("###PARAGRAPH\n");
                for s in &p.sentences {
                    out.push_str(&s.to_line());
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Flattens the corpus at the requested granularity, preserving document
/// order.
pub fn split_cct(c: &CctCorpus, granularity: Granularity) -> Vec<CctUnit> {
    let mut units = Vec::new();
    for (si, sys) in c.systems.iter().enumerate() {
        let sys_label = if sys.name.is_empty() {
            format!("system{si}")
        } else {
            sys.name.clone()
        };
        let mut sys_sentences = Vec::new();
        for (ti, story) in sys.stories.iter().enumerate() {
            let story_label = if story.title.is_empty() {
                format!("{sys_label}/story{ti}")
            } else {
                format!("{sys_label}/{}", story.title)
            };
            let mut story_sentences = Vec::new();
            for (pi, p) in story.paragraphs.iter().enumerate() {
                match granularity {
                    Granularity::Paragraph => units.push(CctUnit {
                        label: format!("{story_label}/p{pi}"),
                        sentences: p.sentences.clone(),
                    }),
                    Granularity::Sentence => {
                        for (qi, s) in p.sentences.iter().enumerate() {
                            units.push(CctUnit {
                                label: format!("{story_label}/p{pi}/s{qi}"),
                                sentences: vec![s.clone()],
                            });
                        }
                    }
                    _ => story_sentences.extend(p.sentences.iter().cloned()),
                }
            }
            match granularity {
                Granularity::Story => units.push(CctUnit {
                    label: story_label,
                    sentences: story_sentences,
                }),
                Granularity::System => sys_sentences.extend(story_sentences),
                _ => {}
            }
        }
        if granularity == Granularity::System {
            units.push(CctUnit {
                label: sys_label,
                sentences: sys_sentences,
            });
        }
    }
    units
}

/// Flattens to sentences and pairs consecutive ones (stride 2) over the
/// whole corpus; pairs may cross paragraph and story boundaries.
pub fn make_pair_units(c: &CctCorpus) -> Vec<Sentence> {
    let sentences: Vec<Sentence> = split_cct(c, Granularity::Sentence)
        .into_iter()
        .flat_map(|u| u.sentences)
        .collect();
    pair_sentences(&sentences)
}

/// Expected counts used to validate a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CctManifest {
    pub systems: usize,
    pub stories: usize,
    pub paragraphs: usize,
    pub sentences: usize,
}

impl CctManifest {
    /// Parses a `key=value` manifest with the keys `systems`, `stories`,
    /// `paragraphs` and `sentences`.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let content = std::fs::read_to_string(path).map_err(io)?;
        let mut m = CctManifest {
            systems: 0,
            stories: 0,
            paragraphs: 0,
            sentences: 0,
        };
        let mut seen = 0;
        for (i, line) in content.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let bad = |reason: String| CorpusError::BadManifest {
                path: path.display().to_string(),
                line: i + 1,
                reason,
            };
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| bad("expected key=value".into()))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| bad(format!("invalid count {:?}", value.trim())))?;
            match key.trim() {
                "systems" => m.systems = value,
                "stories" => m.stories = value,
                "paragraphs" => m.paragraphs = value,
                "sentences" => m.sentences = value,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
            seen += 1;
        }
        if seen != 4 {
            return Err(CorpusError::BadManifest {
                path: path.display().to_string(),
                line: 0,
                reason: "manifest must define systems, stories, paragraphs and sentences".into(),
            });
        }
        Ok(m)
    }
}

/// Checks corpus counts against a manifest.
pub fn validate_manifest(c: &CctCorpus, m: &CctManifest) -> Result<CctCounts, CorpusError> {
    let counts = c.counts();
    let checks = [
        ("systems", m.systems, counts.systems),
        ("stories", m.stories, counts.stories),
        ("paragraphs", m.paragraphs, counts.paragraphs),
        ("sentences", m.sentences, counts.sentences),
    ];
    for (field, expected, found) in checks {
        if expected != found {
            return Err(CorpusError::ManifestMismatch {
                field,
                expected,
                found,
            });
        }
    }
    Ok(counts)
}

/// Adapter from a plain directory tree to the marker format: one
/// subdirectory per system, one `.txt` file per story (sorted by name),
/// paragraphs separated by blank lines, one sentence per line.
pub fn assemble_from_dir(dir: &Path) -> Result<CctCorpus, CorpusError> {
    let io = |p: &Path, source| CorpusError::Io {
        path: p.display().to_string(),
        source,
    };
    let mut corpus = CctCorpus::default();
    let mut system_dirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    system_dirs.sort();
    for sys_dir in system_dirs {
        let name = sys_dir
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let mut system = CctSystem {
            name,
            stories: Vec::new(),
        };
        let mut story_files: Vec<_> = std::fs::read_dir(&sys_dir)
            .map_err(|e| io(&sys_dir, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        story_files.sort();
        for story_file in story_files {
            let title = story_file
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let content = std::fs::read_to_string(&story_file).map_err(|e| io(&story_file, e))?;
            let mut story = CctStory {
                title,
                paragraphs: Vec::new(),
            };
            let mut current = CctParagraph::default();
            for line in content.lines() {
                if line.trim().is_empty() {
                    if !current.sentences.is_empty() {
                        story.paragraphs.push(std::mem::take(&mut current));
                    }
                } else {
                    current.sentences.push(Sentence::from_tokenized_line(line));
                }
            }
            if !current.sentences.is_empty() {
                story.paragraphs.push(current);
            }
            system.stories.push(story);
        }
        corpus.systems.push(system);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const FIXTURE: &str = "#SYSTEM\talpha\n##STORY\tfirst\n###PARAGRAPH\na b .\nc d .\n###PARAGRAPH\ne f .\ng h .\ni j .\n";

    fn parse(s: &str) -> Result<CctCorpus, CorpusError> {
        parse_cct(Cursor::new(s.as_bytes()), "<test>")
    }

    #[test]
    fn parses_fixture_counts() {
        let c = parse(FIXTURE).unwrap();
        let counts = c.counts();
        assert_eq!(
            counts,
            CctCounts {
                systems: 1,
                stories: 1,
                paragraphs: 2,
                sentences: 5
            }
        );
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let c = parse("").unwrap();
        assert!(c.is_empty());
        assert_eq!(c.counts().sentences, 0);
    }

    #[test]
    fn nesting_violations_report_line() {
        let err = parse("##STORY\tx\n").unwrap_err();
        assert!(
            matches!(err, CorpusError::BadMarker { line: 1, .. }),
            "{err}"
        );
        let err = parse("#SYSTEM\ta\n###PARAGRAPH\n").unwrap_err();
        assert!(
            matches!(err, CorpusError::BadMarker { line: 2, .. }),
            "{err}"
        );
        let err = parse("#SYSTEM\ta\n##STORY\tb\nplain sentence\n").unwrap_err();
        assert!(
            matches!(err, CorpusError::BadMarker { line: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn unknown_marker_rejected() {
        let err = parse("#THING\tx\n").unwrap_err();
        assert!(err.to_string().contains("unknown marker"), "{err}");
        let err = parse("#SYSTEM\ta\n##STORY\tb\n###SECTION\n").unwrap_err();
        assert!(err.to_string().contains("unknown marker"), "{err}");
    }

    #[test]
    fn split_granularities() {
        let c = parse(FIXTURE).unwrap();
        assert_eq!(split_cct(&c, Granularity::System).len(), 1);
        assert_eq!(split_cct(&c, Granularity::Story).len(), 1);
        assert_eq!(split_cct(&c, Granularity::Paragraph).len(), 2);
        let sents = split_cct(&c, Granularity::Sentence);
        assert_eq!(sents.len(), 5);
        assert_eq!(sents[0].sentences[0].to_line(), "a b .");
        assert!(split_cct(&CctCorpus::default(), Granularity::Story).is_empty());
    }

    #[test]
    fn counts_are_consistent_across_granularities() {
        let c = parse(FIXTURE).unwrap();
        let counts = c.counts();
        assert_eq!(
            split_cct(&c, Granularity::Paragraph).len(),
            counts.paragraphs
        );
        assert_eq!(split_cct(&c, Granularity::Sentence).len(), counts.sentences);
    }

    #[test]
    fn pair_units_cross_boundaries() {
        let c = parse(FIXTURE).unwrap();
        let pairs = make_pair_units(&c);
        assert_eq!(pairs.len(), 3); // ⌈5/2⌉
        assert_eq!(pairs[0].to_line(), "a b . c d .");
        // second pair crosses the paragraph boundary
        assert_eq!(pairs[1].to_line(), "e f . g h .");
        assert_eq!(pairs[2].to_line(), "i j .");
    }

    #[test]
    fn pairing_preserves_token_multiset() {
        let c = parse(FIXTURE).unwrap();
        let mut before: Vec<String> = split_cct(&c, Granularity::Sentence)
            .iter()
            .flat_map(|u| u.sentences[0].tokens().to_vec())
            .collect();
        let mut after: Vec<String> = make_pair_units(&c)
            .iter()
            .flat_map(|s| s.tokens().to_vec())
            .collect();
        before.sort();
        after.sort();
        assert_eq!(before, after);
    }

    #[test]
    fn round_trips_through_format() {
        let c = parse(FIXTURE).unwrap();
        assert_eq!(format_cct(&c), FIXTURE);
    }

    #[test]
    fn manifest_validation() {
        let c = parse(FIXTURE).unwrap();
        let ok = CctManifest {
            systems: 1,
            stories: 1,
            paragraphs: 2,
            sentences: 5,
        };
        assert!(validate_manifest(&c, &ok).is_ok());
        let bad = CctManifest { sentences: 6, ..ok };
        let err = validate_manifest(&c, &bad).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::ManifestMismatch {
                field: "sentences",
                expected: 6,
                found: 5
            }
        ));
    }

    #[test]
    fn assemble_from_plain_tree() {
        let dir = tempfile::tempdir().unwrap();
        let sys = dir.path().join("storyteller-a");
        std::fs::create_dir(&sys).unwrap();
        std::fs::write(sys.join("tale.txt"), "a b .\nc d .\n\ne f .\n").unwrap();
        let c = assemble_from_dir(dir.path()).unwrap();
        let counts = c.counts();
        assert_eq!(
            counts,
            CctCounts {
                systems: 1,
                stories: 1,
                paragraphs: 2,
                sentences: 3
            }
        );
        assert_eq!(c.systems[0].name, "storyteller-a");
        assert_eq!(c.systems[0].stories[0].title, "tale");
    }
}
