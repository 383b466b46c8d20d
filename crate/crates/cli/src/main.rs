//! `ornate` — a simple-to-complex English rewriting pipeline.

mod commands;
mod errors;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ornate",
    version,
    about = "Train and run an LSTM encoder-decoder that rewrites simple English into richer English",
    after_help = "Exit codes: 0 success, 1 usage error, 2 I/O error, 3 data validation error, 4 numeric failure.\n\
                  ORNATE_CONFIG names a default training config file (flat `key = value`)."
)]
struct Cli {
    /// Seed for every random choice the command makes
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for batch decoding
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    /// One placeholder numbering per story (whole file for plain input)
    Story,
    /// One numbering per output line
    Sentence,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Decide from the first line (`#SYSTEM` marker → cct)
    Auto,
    /// One raw sentence per line
    Plain,
    /// Marker-format story corpus
    Cct,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GranularityArg {
    System,
    Story,
    Paragraph,
    Sentence,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttentionArg {
    General,
    Dot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecayModeArg {
    Compound,
    Constant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnkPolicyArg {
    /// Emit the `<unk>` token as is
    Keep,
    /// Replace `<unk>` with the source token under the attention argmax
    Copy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Sentence,
    Pair,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once; boxing would clutter the derive
enum Command {
    /// Tokenize (and optionally anonymize and pair) a text or story corpus
    Preprocess {
        /// Input file: plain text or marker-format story corpus
        input: PathBuf,
        /// Output corpus file (tokenized, one sentence per line)
        output: PathBuf,
        /// Replace named entities with CATEGORY@k placeholders
        #[arg(long)]
        anonymize: bool,
        /// Concatenate consecutive sentences two at a time
        #[arg(long)]
        pairs: bool,
        /// Placeholder numbering scope
        #[arg(long, value_enum, default_value = "story")]
        scope: ScopeArg,
        /// Input format
        #[arg(long, value_enum, default_value = "auto")]
        format: FormatArg,
        /// Gazetteer file (`CATEGORY<TAB>surface form` per line)
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        /// Where to write the entity-map sidecar (default: OUTPUT.entities)
        #[arg(long)]
        entity_map: Option<PathBuf>,
        /// Where to write the per-line scope ids (default: OUTPUT.scopes)
        #[arg(long)]
        scopes: Option<PathBuf>,
        /// Disable the capitalized-token heuristic of the default recognizer
        #[arg(long)]
        no_caps_heuristic: bool,
    },
    /// Build a frequency-ranked vocabulary from tokenized corpora
    BuildVocab {
        /// Tokenized input files, read in order
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output vocabulary file (one token per line, line number = id)
        #[arg(long, short)]
        output: PathBuf,
        /// Vocabulary cap, special tokens included
        #[arg(long, default_value_t = 50_000)]
        max_size: usize,
    },
    /// Train the encoder-decoder
    Train {
        /// Tokenized source-side training file (simple English)
        #[arg(long)]
        src: PathBuf,
        /// Tokenized target-side training file (complex English)
        #[arg(long)]
        tgt: PathBuf,
        /// Held-out source side (defaults to a split of the training data)
        #[arg(long)]
        valid_src: Option<PathBuf>,
        /// Held-out target side
        #[arg(long)]
        valid_tgt: Option<PathBuf>,
        /// Train/valid/test fractions used when no explicit valid set is given
        #[arg(long, default_value = "0.9,0.05,0.05")]
        split: String,
        /// Vocabulary file
        #[arg(long)]
        vocab: PathBuf,
        /// Output directory (checkpoints, train_log.tsv, train_report.json)
        #[arg(long)]
        out: PathBuf,
        /// Training config file (flat `key = value`); ORNATE_CONFIG is the default
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pretrained embeddings (token v1 … vE per line)
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Resume from a checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Epochs to train [default: 24]
        #[arg(long)]
        epochs: Option<u32>,
        /// Initial learning rate [default: 1.0]
        #[arg(long)]
        lr: Option<f64>,
        /// Global gradient-norm clip [default: 5.0]
        #[arg(long)]
        clip_norm: Option<f64>,
        /// Per-epoch decay factor after the threshold epoch [default: 0.25]
        #[arg(long)]
        decay_factor: Option<f64>,
        /// Last epoch at the full learning rate [default: 18]
        #[arg(long)]
        decay_after_epoch: Option<u32>,
        /// Decay reading: compounding per epoch, or set once [default: compound]
        #[arg(long, value_enum)]
        decay_mode: Option<DecayModeArg>,
        /// Sentence pairs per batch [default: 64]
        #[arg(long)]
        batch_size: Option<usize>,
        /// Source length limit in tokens [default: 100]
        #[arg(long)]
        max_src_len: Option<usize>,
        /// Target length limit in tokens [default: 100]
        #[arg(long)]
        max_tgt_len: Option<usize>,
        /// LSTM layers per encoder and decoder
        #[arg(long, default_value_t = 2)]
        num_layers: usize,
        /// Hidden units per layer
        #[arg(long, default_value_t = 512)]
        hidden_size: usize,
        /// Word-embedding dimension
        #[arg(long, default_value_t = 300)]
        embedding_size: usize,
        /// Dropout rate on non-recurrent connections
        #[arg(long, default_value_t = 0.2)]
        dropout: f64,
        /// Attention score form
        #[arg(long, value_enum, default_value = "general")]
        attention: AttentionArg,
        /// Keep embeddings fixed after initialization
        #[arg(long)]
        freeze_embeddings: bool,
        /// Float width: f32 for training, f64 for verification
        #[arg(long, value_enum, default_value = "f32")]
        precision: PrecisionArg,
    },
    /// Rewrite a tokenized corpus with a trained model
    Embellish {
        /// Input file, one tokenized sentence per line
        input: PathBuf,
        /// Output file
        output: PathBuf,
        /// Model checkpoint
        #[arg(long)]
        checkpoint: PathBuf,
        /// Vocabulary file (must match the checkpoint)
        #[arg(long)]
        vocab: PathBuf,
        /// Beam width; omit for greedy decoding
        #[arg(long)]
        beam: Option<usize>,
        /// Output length cap in tokens
        #[arg(long, default_value_t = 100)]
        max_length: usize,
        /// What to do with generated `<unk>` tokens
        #[arg(long, value_enum, default_value = "keep")]
        unk_policy: UnkPolicyArg,
        /// Restore surface forms from an entity-map sidecar
        #[arg(long)]
        deanonymize: bool,
        /// Entity-map sidecar (default: INPUT.entities)
        #[arg(long)]
        entity_map: Option<PathBuf>,
        /// Per-line scope ids (default: line numbers, or INPUT.scopes if present)
        #[arg(long)]
        scopes: Option<PathBuf>,
    },
    /// Corpus BLEU of a hypothesis file against a reference file
    Score {
        /// Hypothesis file, one tokenized sentence per line
        hypothesis: PathBuf,
        /// Reference file, aligned line by line
        reference: PathBuf,
        /// Write the full decomposition as JSON
        #[arg(long)]
        json: Option<PathBuf>,
        /// Add-one smoothing (sentence-level diagnostics only)
        #[arg(long)]
        smooth: bool,
    },
    /// Classify embellished output against its input and aggregate statistics
    Report {
        /// Input corpus: sentences (sentence mode) or the unpaired sentence
        /// file the pairs were built from (pair mode)
        input: PathBuf,
        /// Embellished output file
        output_embellished: PathBuf,
        /// Classification mode
        #[arg(long, value_enum, default_value = "sentence")]
        mode: ModeArg,
        /// Write PREFIX.txt and PREFIX.json
        #[arg(long)]
        out: Option<PathBuf>,
        /// Content-overlap threshold for substitutions / combined pairs
        #[arg(long, default_value_t = 0.30)]
        substitution_overlap: f64,
        /// Overlap threshold against the first member for first_kept
        #[arg(long, default_value_t = 0.60)]
        first_kept_overlap: f64,
    },
    /// Inspect, validate or assemble a marker-format story corpus
    Cct {
        /// Corpus file in marker format
        path: PathBuf,
        /// Flatten at this granularity and print the unit count
        #[arg(long, value_enum)]
        granularity: Option<GranularityArg>,
        /// Write the flattened units, one per line
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check counts against a `key = value` manifest
        #[arg(long)]
        validate_manifest: Option<PathBuf>,
        /// Assemble PATH from a directory tree (system dirs, story .txt files,
        /// blank-line paragraph breaks) before anything else
        #[arg(long)]
        from_dir: Option<PathBuf>,
        /// Print pair-unit count (consecutive sentences concatenated)
        #[arg(long)]
        pairs: bool,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let result = match cli.command {
        Command::Preprocess {
            ref input,
            ref output,
            anonymize,
            pairs,
            scope,
            format,
            ref gazetteer,
            ref entity_map,
            ref scopes,
            no_caps_heuristic,
        } => commands::preprocess::run(commands::preprocess::Args {
            input,
            output,
            anonymize,
            pairs,
            scope,
            format,
            gazetteer: gazetteer.as_deref(),
            entity_map: entity_map.as_deref(),
            scopes: scopes.as_deref(),
            no_caps_heuristic,
        }),
        Command::BuildVocab {
            ref inputs,
            ref output,
            max_size,
        } => commands::build_vocab::run(inputs, output, max_size),
        Command::Train { .. } => commands::train::run(&cli),
        Command::Embellish { .. } => commands::embellish::run(&cli),
        Command::Score {
            ref hypothesis,
            ref reference,
            ref json,
            smooth,
        } => commands::score::run(hypothesis, reference, json.as_deref(), smooth),
        Command::Report {
            ref input,
            ref output_embellished,
            mode,
            ref out,
            substitution_overlap,
            first_kept_overlap,
        } => commands::report::run(
            input,
            output_embellished,
            mode,
            out.as_deref(),
            substitution_overlap,
            first_kept_overlap,
        ),
        Command::Cct {
            ref path,
            granularity,
            ref out,
            ref validate_manifest,
            ref from_dir,
            pairs,
        } => commands::cct::run(
            path,
            granularity,
            out.as_deref(),
            validate_manifest.as_deref(),
            from_dir.as_deref(),
            pairs,
        ),
    };

    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
