//! `ornate train`: the full training entry point.

use std::path::Path;

use ornate_core::corpus::{load_parallel, split_dataset, DatasetSplit, ParallelCorpus};
use ornate_core::neural::{
    load_pretrained_embeddings, vocab_hash, AttentionKind, Model, ModelConfig, Scalar,
};
use ornate_core::textpipe::Vocabulary;
use ornate_core::training::{
    load_checkpoint, save_checkpoint, train_from, DecayMode, TrainConfig, TrainReport,
};

use crate::errors::{write_file, CliError};
use crate::{AttentionArg, Cli, Command, DecayModeArg, PrecisionArg};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let Command::Train {
        src,
        tgt,
        valid_src,
        valid_tgt,
        split,
        vocab,
        out,
        config,
        embeddings,
        resume,
        epochs,
        lr,
        clip_norm,
        decay_factor,
        decay_after_epoch,
        decay_mode,
        batch_size,
        max_src_len,
        max_tgt_len,
        num_layers,
        hidden_size,
        embedding_size,
        dropout,
        attention,
        freeze_embeddings,
        precision,
    } = &cli.command
    else {
        unreachable!("dispatched on the train subcommand");
    };

    // defaults < config file (flag or ORNATE_CONFIG) < explicit flags
    let mut train_cfg = TrainConfig {
        seed: cli.seed,
        ..TrainConfig::default()
    };
    let config_path = config
        .clone()
        .or_else(|| std::env::var_os("ORNATE_CONFIG").map(Into::into));
    if let Some(path) = config_path {
        train_cfg.apply_file(&path)?;
    }
    if let Some(v) = epochs {
        train_cfg.epochs = *v;
    }
    if let Some(v) = lr {
        train_cfg.lr0 = *v;
    }
    if let Some(v) = clip_norm {
        train_cfg.clip_norm = *v;
    }
    if let Some(v) = decay_factor {
        train_cfg.decay_factor = *v;
    }
    if let Some(v) = decay_after_epoch {
        train_cfg.decay_after_epoch = *v;
    }
    if let Some(v) = decay_mode {
        train_cfg.decay_mode = match v {
            DecayModeArg::Compound => DecayMode::Compound,
            DecayModeArg::Constant => DecayMode::Constant,
        };
    }
    if let Some(v) = batch_size {
        train_cfg.batch_size = *v;
    }
    if let Some(v) = max_src_len {
        train_cfg.max_source_length = *v;
    }
    if let Some(v) = max_tgt_len {
        train_cfg.max_target_length = *v;
    }
    train_cfg.validate()?;

    let vocabulary = Vocabulary::load(vocab)?;
    let data = load_data(
        src,
        tgt,
        valid_src.as_deref(),
        valid_tgt.as_deref(),
        split,
        cli.seed,
    )?;
    println!(
        "pairs: train {}  valid {}  test {}",
        data.train.len(),
        data.valid.len(),
        data.test.len()
    );

    let model_cfg = ModelConfig {
        num_layers: *num_layers,
        hidden_size: *hidden_size,
        embedding_size: *embedding_size,
        vocab_size: vocabulary.len(),
        dropout_rate: *dropout,
        attention: match attention {
            AttentionArg::General => AttentionKind::General,
            AttentionArg::Dot => AttentionKind::Dot,
        },
        finetune_embeddings: !*freeze_embeddings,
    };

    match precision {
        PrecisionArg::F32 => train_typed::<f32>(
            cli,
            &train_cfg,
            model_cfg,
            &vocabulary,
            &data,
            out,
            embeddings.as_deref(),
            resume.as_deref(),
        ),
        PrecisionArg::F64 => train_typed::<f64>(
            cli,
            &train_cfg,
            model_cfg,
            &vocabulary,
            &data,
            out,
            embeddings.as_deref(),
            resume.as_deref(),
        ),
    }
}

fn load_data(
    src: &Path,
    tgt: &Path,
    valid_src: Option<&Path>,
    valid_tgt: Option<&Path>,
    split: &str,
    seed: u64,
) -> Result<DatasetSplit, CliError> {
    let train = load_parallel(src, tgt)?;
    match (valid_src, valid_tgt) {
        (Some(vs), Some(vt)) => Ok(DatasetSplit {
            train,
            valid: load_parallel(vs, vt)?,
            test: ParallelCorpus::default(),
            seed,
        }),
        (None, None) => {
            let fractions = parse_fractions(split)?;
            Ok(split_dataset(&train, fractions, seed)?)
        }
        _ => Err(CliError::Usage(
            "--valid-src and --valid-tgt must be given together".to_string(),
        )),
    }
}

fn parse_fractions(s: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--split wants three comma-separated fractions, got {s:?}"
        )));
    }
    let parse = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("invalid fraction {p:?}")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

#[allow(clippy::too_many_arguments)]
fn train_typed<F: Scalar>(
    cli: &Cli,
    train_cfg: &TrainConfig,
    model_cfg: ModelConfig,
    vocabulary: &Vocabulary,
    data: &DatasetSplit,
    out: &Path,
    embeddings: Option<&Path>,
    resume: Option<&Path>,
) -> Result<(), CliError> {
    let vhash = vocab_hash(vocabulary);
    let (model, first_epoch) = match resume {
        Some(ckpt_path) => {
            let ckpt = load_checkpoint::<F>(ckpt_path)?;
            ckpt.verify_vocab_hash(vhash)?;
            println!(
                "resuming from {} after epoch {}",
                ckpt_path.display(),
                ckpt.completed_epochs
            );
            (ckpt.model, ckpt.completed_epochs + 1)
        }
        None => {
            let mut model = Model::<F>::init(model_cfg, cli.seed)?;
            if let Some(emb_path) = embeddings {
                let (table, coverage) = load_pretrained_embeddings::<F>(
                    emb_path,
                    vocabulary,
                    model.config(),
                    cli.seed,
                )?;
                model.set_embedding_table(table)?;
                println!(
                    "embeddings: {} found, {} initialized ({:.1}% coverage)",
                    coverage.found,
                    coverage.missing,
                    100.0 * coverage.fraction()
                );
            }
            (model, 1)
        }
    };

    let (model, report) = train_from(model, vocabulary, data, train_cfg, Some(out), first_epoch)?;
    for e in &report.epochs {
        println!(
            "epoch {:>3}  lr {:<10} loss {:.4}  valid BLEU {:>6.2}  ({:.1}s)",
            e.epoch, e.learning_rate, e.train_loss, e.valid_bleu, e.seconds
        );
    }
    write_report(&report, out)?;
    save_checkpoint(
        &model,
        train_cfg,
        vhash,
        train_cfg.epochs,
        &out.join("final.ckpt"),
    )?;
    println!("final checkpoint: {}", out.join("final.ckpt").display());
    Ok(())
}

fn write_report(report: &TrainReport, out: &Path) -> Result<(), CliError> {
    write_file(&out.join("train_log.tsv"), &report.to_tsv())?;
    write_file(&out.join("train_report.json"), &report.to_json())?;
    Ok(())
}
