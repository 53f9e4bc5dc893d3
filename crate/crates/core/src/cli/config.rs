//! `key = value` run configuration with precedence flags > file > defaults.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::seqdata::Split;
use crate::training::Precision;

fn parse_value<T: FromStr>(raw: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    raw.parse::<T>().map_err(|e| format!("cannot parse `{raw}`: {e}"))
}

macro_rules! overrides {
    ($( $field:ident : $ty:ty = $key:literal ),* $(,)?) => {
        /// Optional value for every configurable key.
        #[derive(Clone, Debug, Default, PartialEq)]
        pub struct Overrides {
            $(pub $field: Option<$ty>,)*
        }

        /// Every key accepted in a config file.
        pub const KEYS: &[&str] = &[$($key),*];

        impl Overrides {
            fn from_pairs(pairs: &[(usize, String, String)], errors: &mut Vec<String>) -> Self {
                let mut out = Overrides::default();
                for (line, key, raw) in pairs {
                    match key.as_str() {
                        $($key => match parse_value::<$ty>(raw) {
                            Ok(v) => out.$field = Some(v),
                            Err(e) => errors.push(format!("line {line}: `{key}`: {e}")),
                        },)*
                        _ => errors.push(format!("line {line}: unknown key `{key}`")),
                    }
                }
                out
            }

            /// Fields set in `self` win over `fallback`.
            pub fn or(self, fallback: Overrides) -> Overrides {
                Overrides {
                    $($field: self.$field.or(fallback.$field),)*
                }
            }
        }
    };
}

overrides! {
    seed: u64 = "seed",
    epochs: usize = "epochs",
    lr: f64 = "lr",
    batch_size: usize = "batch-size",
    dropout: f64 = "dropout",
    kernel_size: usize = "kernel-size",
    blocks: usize = "blocks",
    hidden: usize = "hidden",
    head_hidden: usize = "head-hidden",
    pe_dim: usize = "pe-dim",
    pe_base: f64 = "pe-base",
    no_positional_encoding: bool = "no-positional-encoding",
    precision: Precision = "precision",
    lambda: f64 = "lambda",
    threads: usize = "threads",
    data_dir: PathBuf = "data-dir",
    val_dir: PathBuf = "val-dir",
    out_dir: PathBuf = "out-dir",
    checkpoint: PathBuf = "checkpoint",
    pred_dir: PathBuf = "pred-dir",
    pred_a: PathBuf = "pred-a",
    pred_b: PathBuf = "pred-b",
    clamp: bool = "clamp",
    videos: usize = "videos",
    min_len: usize = "min-len",
    max_len: usize = "max-len",
    features: usize = "features",
    expressions: usize = "expressions",
    gap_prob: f64 = "gap-prob",
    split: Split = "split",
}

/// Parses config-file text. Blank lines and `#` comments are ignored; every
/// problem (syntax, unknown key, duplicate, bad value) is reported together.
pub fn parse_config_text(text: &str) -> Result<Overrides> {
    let mut errors = Vec::new();
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected `key = value`", i + 1));
            continue;
        };
        let key = key.trim().to_string();
        if pairs.iter().any(|(_, k, _)| *k == key) {
            errors.push(format!("line {}: duplicate key `{key}`", i + 1));
            continue;
        }
        pairs.push((i + 1, key, value.trim().to_string()));
    }
    let out = Overrides::from_pairs(&pairs, &mut errors);
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(Error::Config(errors.join("\n  ")))
    }
}

pub fn load_config_file(path: &Path) -> Result<Overrides> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_text(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}:\n  {m}", path.display())),
        e => e,
    })
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub kernel_size: usize,
    pub blocks: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    pub pe_dim: usize,
    pub pe_base: f64,
    pub positional_encoding: bool,
    pub precision: Precision,
    pub lambda: f64,
    pub threads: Option<usize>,
    pub data_dir: Option<PathBuf>,
    pub val_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub pred_dir: Option<PathBuf>,
    pub pred_a: Option<PathBuf>,
    pub pred_b: Option<PathBuf>,
    pub clamp: bool,
    pub videos: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub features: usize,
    pub expressions: usize,
    pub gap_prob: f64,
    pub split: Split,
}

impl RunConfig {
    pub fn resolve(o: Overrides) -> Result<RunConfig> {
        let cfg = RunConfig {
            seed: o.seed.unwrap_or(0),
            epochs: o.epochs.unwrap_or(20),
            lr: o.lr.unwrap_or(5e-3),
            batch_size: o.batch_size.unwrap_or(32),
            dropout: o.dropout.unwrap_or(0.2),
            kernel_size: o.kernel_size.unwrap_or(3),
            blocks: o.blocks.unwrap_or(4),
            hidden: o.hidden.unwrap_or(64),
            head_hidden: o.head_hidden.unwrap_or(64),
            pe_dim: o.pe_dim.unwrap_or(16),
            pe_base: o.pe_base.unwrap_or(10000.0),
            positional_encoding: !o.no_positional_encoding.unwrap_or(false),
            precision: o.precision.unwrap_or(Precision::Standard),
            lambda: o.lambda.unwrap_or(0.8),
            threads: o.threads,
            data_dir: o.data_dir,
            val_dir: o.val_dir,
            out_dir: o.out_dir,
            checkpoint: o.checkpoint,
            pred_dir: o.pred_dir,
            pred_a: o.pred_a,
            pred_b: o.pred_b,
            clamp: o.clamp.unwrap_or(false),
            videos: o.videos.unwrap_or(8),
            min_len: o.min_len.unwrap_or(100),
            max_len: o.max_len.unwrap_or(140),
            features: o.features.unwrap_or(8),
            expressions: o.expressions.unwrap_or(crate::seqdata::DEFAULT_LABEL_DIM),
            gap_prob: o.gap_prob.unwrap_or(0.0),
            split: o.split.unwrap_or(Split::Train),
        };
        cfg.check_ranges()?;
        Ok(cfg)
    }

    fn check_ranges(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut at_least_one = |key: &str, v: usize| {
            if v == 0 {
                errors.push(format!("`{key}` must be >= 1"));
            }
        };
        at_least_one("epochs", self.epochs);
        at_least_one("batch-size", self.batch_size);
        at_least_one("kernel-size", self.kernel_size);
        at_least_one("hidden", self.hidden);
        at_least_one("head-hidden", self.head_hidden);
        at_least_one("videos", self.videos);
        at_least_one("min-len", self.min_len);
        at_least_one("features", self.features);
        at_least_one("expressions", self.expressions);
        if self.threads == Some(0) {
            errors.push("`threads` must be >= 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            errors.push(format!("`lr` must be finite and >= 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            errors.push(format!("`dropout` must lie in [0, 1), got {}", self.dropout));
        }
        if self.pe_dim == 0 || !self.pe_dim.is_multiple_of(2) {
            errors.push(format!("`pe-dim` must be even and positive, got {}", self.pe_dim));
        }
        if !(self.pe_base > 1.0 && self.pe_base.is_finite()) {
            errors.push(format!("`pe-base` must be finite and > 1, got {}", self.pe_base));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            errors.push(format!("`lambda` must lie in [0, 1], got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.gap_prob) {
            errors.push(format!("`gap-prob` must lie in [0, 1), got {}", self.gap_prob));
        }
        if self.min_len > self.max_len {
            errors.push(format!("`min-len` {} exceeds `max-len` {}", self.min_len, self.max_len));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors.join("\n  ")))
        }
    }

    /// Training-relevant settings as `key=value` lines, loadable with `--config`.
    pub fn training_echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        put("seed", self.seed.to_string());
        put("epochs", self.epochs.to_string());
        put("lr", self.lr.to_string());
        put("batch-size", self.batch_size.to_string());
        put("dropout", self.dropout.to_string());
        put("kernel-size", self.kernel_size.to_string());
        put("blocks", self.blocks.to_string());
        put("hidden", self.hidden.to_string());
        put("head-hidden", self.head_hidden.to_string());
        put("pe-dim", self.pe_dim.to_string());
        put("pe-base", self.pe_base.to_string());
        put("no-positional-encoding", (!self.positional_encoding).to_string());
        put("precision", self.precision.to_string());
        if let Some(d) = &self.data_dir {
            put("data-dir", d.display().to_string());
        }
        if let Some(d) = &self.val_dir {
            put("val-dir", d.display().to_string());
        }
        s
    }
}
