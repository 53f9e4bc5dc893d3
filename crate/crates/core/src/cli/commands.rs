use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{ensemble, evaluate, PredictionMatrix};
use crate::seqdata::{
    concat_positional, drop_unannotated, generate_synthetic, load_feature_file, load_prediction_file,
    save_feature_file, Dataset, PositionalEncodingConfig, Split, SynthConfig,
};
use crate::tcn::{load_checkpoint_any, save_checkpoint, AnyTcnModel, TcnConfig, TcnModel};
use crate::tensor::Scalar;
use crate::training::{predict_dataset, train_with_validation, Precision, TrainConfig, TrainLog};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CHECKPOINT_FILE: &str = "model.tcnk";
pub const LOG_FILE: &str = "train_log.txt";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.txt";
const FSEQ_EXT: &str = "fseq";

fn required<'a>(v: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    v.as_deref()
        .ok_or_else(|| Error::Config(format!("missing required `--{key}`")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn emit(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// FSEQ1 files of a directory: the manifest order when `manifest.txt` exists,
/// otherwise every `*.fseq` sorted by name.
fn list_files(dir: &Path) -> Result<(Vec<PathBuf>, Option<Split>)> {
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.exists() {
        let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let mut files = Vec::new();
        let mut split = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split('\t').collect();
            let [_, s, file] = fields[..] else {
                return Err(Error::Format(format!("manifest line {}: expected 3 tab-separated fields", i + 1))
                    .in_file(&manifest));
            };
            let s: Split = s.parse().map_err(|e: Error| e.in_file(&manifest))?;
            split.get_or_insert(s);
            files.push(dir.join(file));
        }
        return Ok((files, split));
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == FSEQ_EXT) {
            files.push(path);
        }
    }
    files.sort();
    Ok((files, None))
}

/// Loads every sequence of a data directory (in parallel, order preserved).
pub fn load_dataset_dir(dir: &Path) -> Result<Dataset> {
    let (files, split) = list_files(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyInput(format!("no FSEQ1 files in {}", dir.display())));
    }
    let sequences = files
        .par_iter()
        .map(load_feature_file)
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(sequences, split.unwrap_or(Split::Train)).map_err(|e| e.in_file(dir))
}

pub fn load_prediction_dir(dir: &Path) -> Result<Vec<PredictionMatrix>> {
    let (files, _) = list_files(dir)?;
    files
        .par_iter()
        .map(|f| {
            load_prediction_file(f)
                .and_then(|s| PredictionMatrix::from_sequence(&s))
                .map_err(|e| e.in_file(f))
        })
        .collect()
}

pub fn write_prediction_dir(dir: &Path, preds: &[PredictionMatrix]) -> Result<()> {
    create_dir(dir)?;
    for p in preds {
        save_feature_file(&p.to_sequence()?, dir.join(format!("{}.{FSEQ_EXT}", p.video_id)))?;
    }
    Ok(())
}

/// Drops unannotated rows and appends the positional encoding. Videos left
/// empty are rejected, naming the video.
fn prepare(data: &Dataset, pe: &PositionalEncodingConfig) -> Result<Dataset> {
    data.map(|seq| {
        let kept = drop_unannotated(seq);
        if kept.is_empty() {
            return Err(Error::EmptyInput(format!(
                "video `{}` has no annotated rows",
                seq.video_id()
            )));
        }
        concat_positional(&kept, pe)
    })
}

fn uniform_dims(data: &Dataset) -> Result<(usize, usize)> {
    let first = &data.sequences()[0];
    let d = first.feature_dim();
    let c = first
        .label_dim()
        .ok_or_else(|| Error::Validation(format!("video `{}` has no labels", first.video_id())))?;
    for seq in data.sequences() {
        if seq.feature_dim() != d || seq.label_dim() != Some(c) {
            return Err(Error::Shape(format!(
                "video `{}` has {} features / {:?} labels, expected {d} / {c}",
                seq.video_id(),
                seq.feature_dim(),
                seq.label_dim()
            )));
        }
    }
    Ok((d, c))
}

pub fn cmd_synth(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dir = required(&cfg.out_dir, "out-dir")?;
    let synth = SynthConfig {
        seed: cfg.seed,
        n_videos: cfg.videos,
        min_len: cfg.min_len,
        max_len: cfg.max_len,
        feature_dim: cfg.features,
        label_dim: cfg.expressions,
        gap_prob: cfg.gap_prob,
        split: cfg.split,
    };
    let data = generate_synthetic(&synth)?;
    create_dir(dir)?;
    let mut manifest = String::new();
    for seq in data.sequences() {
        let file = format!("{}.{FSEQ_EXT}", seq.video_id());
        save_feature_file(seq, dir.join(&file))?;
        manifest.push_str(&format!("{}\t{}\t{file}\n", seq.video_id(), data.split()));
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    emit(
        out,
        format!(
            "synth seed={} videos={} features={} expressions={} gap_prob={} -> {}\n",
            cfg.seed,
            data.len(),
            cfg.features,
            cfg.expressions,
            cfg.gap_prob,
            dir.display()
        ),
    )
}

fn positional_of(cfg: &RunConfig) -> PositionalEncodingConfig {
    PositionalEncodingConfig {
        dim: cfg.pe_dim,
        base: cfg.pe_base,
        enabled: cfg.positional_encoding,
    }
}

fn run_training<S: Scalar>(
    model_cfg: TcnConfig,
    data: &Dataset,
    val: Option<&Dataset>,
    train_cfg: &TrainConfig,
    out: &mut dyn Write,
    dir: &Path,
) -> Result<TrainLog> {
    let model = TcnModel::<S>::initialized(model_cfg, train_cfg.seed)?;
    let mut echo_err = None;
    let (model, log) = train_with_validation(model, data, val, train_cfg, |rec| {
        if let Err(e) = emit(out, format!("{rec}\n")) {
            echo_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = echo_err {
        return Err(e);
    }
    save_checkpoint(&model, dir.join(CHECKPOINT_FILE))?;
    Ok(log)
}

pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let data_dir = required(&cfg.data_dir, "data-dir")?;
    let dir = required(&cfg.out_dir, "out-dir")?;
    emit(out, "# resolved config\n")?;
    emit(out, cfg.training_echo())?;

    let pe = positional_of(cfg);
    let data = prepare(&load_dataset_dir(data_dir)?, &pe).map_err(|e| e.in_file(data_dir))?;
    let val = match &cfg.val_dir {
        Some(v) => Some(prepare(&load_dataset_dir(v)?, &pe).map_err(|e| e.in_file(v))?),
        None => None,
    };
    let (input_dim, output_dim) = uniform_dims(&data).map_err(|e| e.in_file(data_dir))?;
    let model_cfg = TcnConfig {
        input_dim,
        hidden_channels: cfg.hidden,
        kernel_size: cfg.kernel_size,
        dropout_rate: cfg.dropout,
        head_hidden: cfg.head_hidden,
        output_dim,
        ..TcnConfig::new(input_dim - pe.added_columns(), output_dim, pe).with_blocks(cfg.blocks)
    };
    model_cfg.validate()?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        learning_rate: cfg.lr,
        batch_size: cfg.batch_size,
        accumulation: true,
        seed: cfg.seed,
        precision: cfg.precision,
    };
    emit(
        out,
        format!(
            "# model input_dim={} receptive_field={}\n",
            model_cfg.input_dim,
            crate::tcn::receptive_field(&model_cfg)
        ),
    )?;

    create_dir(dir)?;
    let log = match cfg.precision {
        Precision::Standard => run_training::<f32>(model_cfg, &data, val.as_ref(), &train_cfg, out, dir)?,
        Precision::Wide => run_training::<f64>(model_cfg, &data, val.as_ref(), &train_cfg, out, dir)?,
    };
    for (name, text) in [(LOG_FILE, log.to_string()), (RESOLVED_CONFIG_FILE, cfg.training_echo())] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    emit(out, format!("checkpoint {}\n", dir.join(CHECKPOINT_FILE).display()))
}

pub fn cmd_predict(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let ckpt = required(&cfg.checkpoint, "checkpoint")?;
    let data_dir = required(&cfg.data_dir, "data-dir")?;
    let dir = required(&cfg.out_dir, "out-dir")?;
    let model = load_checkpoint_any(ckpt)?;
    let data = prepare(&load_dataset_dir(data_dir)?, &model.config().positional).map_err(|e| e.in_file(data_dir))?;
    let mut preds = match &model {
        AnyTcnModel::Standard(m) => predict_dataset(m, &data),
        AnyTcnModel::Wide(m) => predict_dataset(m, &data),
    }
    .map_err(|e| e.in_file(data_dir))?;
    if cfg.clamp {
        preds = preds.iter().map(PredictionMatrix::clamped).collect();
    }
    write_prediction_dir(dir, &preds)?;
    emit(out, format!("predicted {} videos -> {}\n", preds.len(), dir.display()))
}

pub fn cmd_evaluate(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let pred_dir = required(&cfg.pred_dir, "pred-dir")?;
    let data_dir = required(&cfg.data_dir, "data-dir")?;
    let labels = load_dataset_dir(data_dir)?.map(|s| Ok(drop_unannotated(s)))?;
    let preds = load_prediction_dir(pred_dir)?;
    let report = evaluate(&labels, &preds)?;
    let text = report.to_string();
    if let Some(dir) = &cfg.out_dir {
        create_dir(dir)?;
        let path = dir.join("report.txt");
        fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    }
    emit(out, text)
}

pub fn cmd_ensemble(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let a = required(&cfg.pred_a, "pred-a")?;
    let b = required(&cfg.pred_b, "pred-b")?;
    let dir = required(&cfg.out_dir, "out-dir")?;
    emit(out, format!("ensemble lambda={}\n", cfg.lambda))?;
    let merged = ensemble(&load_prediction_dir(a)?, &load_prediction_dir(b)?, cfg.lambda)?;
    write_prediction_dir(dir, &merged)?;
    emit(out, format!("wrote {} videos -> {}\n", merged.len(), dir.display()))
}

