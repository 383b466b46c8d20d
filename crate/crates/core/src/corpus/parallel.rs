//! Aligned simple→complex sentence pairs.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::CorpusError;
use crate::textpipe::Sentence;

/// A sentence-aligned corpus: `source[i]` is the simple-English side of
/// `target[i]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    source: Vec<Sentence>,
    target: Vec<Sentence>,
}

impl ParallelCorpus {
    pub fn new(source: Vec<Sentence>, target: Vec<Sentence>) -> Self {
        assert_eq!(source.len(), target.len(), "sides must be aligned");
        Self { source, target }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source(&self) -> &[Sentence] {
        &self.source
    }

    pub fn target(&self) -> &[Sentence] {
        &self.target
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Sentence, &Sentence)> {
        self.source.iter().zip(self.target.iter())
    }

    pub fn pair(&self, i: usize) -> (&Sentence, &Sentence) {
        (&self.source[i], &self.target[i])
    }
}

fn load_side(path: &Path) -> Result<Vec<Sentence>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut side = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            return Err(CorpusError::EmptyLine {
                path: path.display().to_string(),
                line: i + 1,
            });
        }
        side.push(Sentence::from_tokenized_line(&line));
    }
    Ok(side)
}

/// Loads two aligned tokenized files (one sentence per line). Line `i` of
/// the source file aligns with line `i` of the target file.
pub fn load_parallel(src_path: &Path, tgt_path: &Path) -> Result<ParallelCorpus, CorpusError> {
    let source = load_side(src_path)?;
    let target = load_side(tgt_path)?;
    if source.len() != target.len() {
        return Err(CorpusError::AlignmentMismatch {
            src_path: src_path.display().to_string(),
            tgt_path: tgt_path.display().to_string(),
            src_lines: source.len(),
            tgt_lines: target.len(),
        });
    }
    Ok(ParallelCorpus { source, target })
}

/// Writes both sides back to disk, one sentence per line, tokens joined by
/// single spaces. Re-serialization of a loaded tokenized file is
/// byte-identical.
pub fn save_parallel(
    c: &ParallelCorpus,
    src_path: &Path,
    tgt_path: &Path,
) -> Result<(), CorpusError> {
    for (path, side) in [(src_path, &c.source), (tgt_path, &c.target)] {
        let io = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for s in side {
            writeln!(f, "{}", s.to_line()).map_err(io)?;
        }
        f.flush().map_err(io)?;
    }
    Ok(())
}

/// Disjoint train/valid/test partition of a parallel corpus.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: ParallelCorpus,
    pub valid: ParallelCorpus,
    pub test: ParallelCorpus,
    pub seed: u64,
}

/// Splits a corpus by a deterministic shuffle under `seed` followed by a
/// contiguous partition. Sizes are `⌊n·f_train⌋ / ⌊n·f_valid⌋ / remainder`.
pub fn split_dataset(
    c: &ParallelCorpus,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    let (ft, fv, fe) = fractions;
    if !(ft > 0.0 && fv > 0.0 && fe > 0.0) || (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions { fractions });
    }
    if c.len() < 3 {
        return Err(CorpusError::TooSmallToSplit { size: c.len() });
    }
    let mut indices: Vec<usize> = (0..c.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let n = c.len();
    let n_train = ((n as f64) * ft).floor() as usize;
    let n_valid = ((n as f64) * fv).floor() as usize;
    let take = |range: &[usize]| {
        ParallelCorpus::new(
            range.iter().map(|&i| c.source[i].clone()).collect(),
            range.iter().map(|&i| c.target[i].clone()).collect(),
        )
    };
    Ok(DatasetSplit {
        train: take(&indices[..n_train]),
        valid: take(&indices[n_train..n_train + n_valid]),
        test: take(&indices[n_train + n_valid..]),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(dir: &Path, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn loads_aligned_files() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_lines(dir.path(), "s", &["a b", "c d", "e f"]);
        let tgt = write_lines(dir.path(), "t", &["A B", "C D", "E F"]);
        let c = load_parallel(&src, &tgt).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.pair(1).0.to_line(), "c d");
    }

    #[test]
    fn reports_both_counts_on_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_lines(dir.path(), "s", &["a", "b", "c"]);
        let tgt = write_lines(dir.path(), "t", &["A", "B", "C", "D"]);
        let err = load_parallel(&src, &tgt).unwrap_err();
        assert!(err.to_string().contains("3 vs 4"), "{err}");
    }

    #[test]
    fn rejects_empty_lines_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_lines(dir.path(), "s", &["a", "", "c"]);
        let tgt = write_lines(dir.path(), "t", &["A", "B", "C"]);
        let err = load_parallel(&src, &tgt).unwrap_err();
        assert!(
            matches!(err, CorpusError::EmptyLine { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn reserialization_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_lines(dir.path(), "s", &["a b .", "c d ."]);
        let tgt = write_lines(dir.path(), "t", &["A B .", "C D ."]);
        let c = load_parallel(&src, &tgt).unwrap();
        let src2 = dir.path().join("s2");
        let tgt2 = dir.path().join("t2");
        save_parallel(&c, &src2, &tgt2).unwrap();
        assert_eq!(std::fs::read(&src).unwrap(), std::fs::read(&src2).unwrap());
        assert_eq!(std::fs::read(&tgt).unwrap(), std::fs::read(&tgt2).unwrap());
    }

    fn numbered(n: usize) -> ParallelCorpus {
        let side = |prefix: &str| {
            (0..n)
                .map(|i| Sentence::from_tokenized_line(&format!("{prefix}{i}")))
                .collect::<Vec<_>>()
        };
        ParallelCorpus::new(side("s"), side("t"))
    }

    #[test]
    fn split_sizes() {
        let c = numbered(10);
        let sp = split_dataset(&c, (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((sp.train.len(), sp.valid.len(), sp.test.len()), (8, 1, 1));
        let c = numbered(100);
        let sp = split_dataset(&c, (0.5, 0.25, 0.25), 7).unwrap();
        assert_eq!(
            (sp.train.len(), sp.valid.len(), sp.test.len()),
            (50, 25, 25)
        );
    }

    #[test]
    fn split_is_deterministic_and_exhaustive() {
        let c = numbered(37);
        let a = split_dataset(&c, (0.6, 0.2, 0.2), 42).unwrap();
        let b = split_dataset(&c, (0.6, 0.2, 0.2), 42).unwrap();
        for (x, y) in [
            (&a.train, &b.train),
            (&a.valid, &b.valid),
            (&a.test, &b.test),
        ] {
            assert_eq!(x.source(), y.source());
        }
        let mut all: Vec<String> = a
            .train
            .source()
            .iter()
            .chain(a.valid.source())
            .chain(a.test.source())
            .map(Sentence::to_line)
            .collect();
        all.sort();
        let mut expect: Vec<String> = c.source().iter().map(Sentence::to_line).collect();
        expect.sort();
        assert_eq!(all, expect);
    }

    #[test]
    fn split_rejects_tiny_and_bad_fractions() {
        let c = numbered(2);
        assert!(matches!(
            split_dataset(&c, (0.5, 0.25, 0.25), 1),
            Err(CorpusError::TooSmallToSplit { size: 2 })
        ));
        let c = numbered(10);
        assert!(split_dataset(&c, (0.5, 0.25, 0.35), 1).is_err());
        assert!(split_dataset(&c, (1.0, 0.0, 0.0), 1).is_err());
    }
}
