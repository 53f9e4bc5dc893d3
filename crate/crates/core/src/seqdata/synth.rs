//! Seeded synthetic stand-in for a per-frame expression dataset.
//!
//! Features follow a smooth AR(1) process. Each label column mixes a causal
//! moving average of a fixed feature projection with a slow sinusoid of the
//! original frame index, squashed into `(0, 1)`. The sinusoid is only
//! recoverable from the timestamp, so it rewards positional information once
//! unannotated rows are dropped.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, FeatureSequence, Split, DEFAULT_LABEL_DIM};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

const AR_COEF: f64 = 0.9;
const MA_WINDOW: usize = 4;
const FEATURE_GAIN: f64 = 1.5;
const TREND_GAIN: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_videos: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub feature_dim: usize,
    pub label_dim: usize,
    /// Probability that a row is left unannotated.
    pub gap_prob: f64,
    pub split: Split,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_videos: 8,
            min_len: 100,
            max_len: 140,
            feature_dim: 8,
            label_dim: DEFAULT_LABEL_DIM,
            gap_prob: 0.0,
            split: Split::Train,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_videos == 0 {
            problems.push("n_videos must be at least 1".to_string());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            problems.push(format!(
                "length range [{}, {}] is empty or starts at 0",
                self.min_len, self.max_len
            ));
        }
        if self.feature_dim == 0 || self.label_dim == 0 {
            problems.push("feature and label dims must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.gap_prob) {
            problems.push(format!("gap_prob {} outside [0, 1)", self.gap_prob));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

struct LabelModel {
    /// `label_dim × feature_dim` unit-norm projections.
    projections: Vec<Vec<f64>>,
    frequencies: Vec<f64>,
    phases: Vec<f64>,
}

impl LabelModel {
    fn draw(rng: &mut ChaCha8Rng, d: usize, c: usize) -> Self {
        let projections = (0..c)
            .map(|_| {
                let mut p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
                p.iter_mut().for_each(|v| *v /= norm);
                p
            })
            .collect();
        let frequencies = (0..c).map(|_| rng.gen_range(0.05..0.15)).collect();
        let phases = (0..c).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        LabelModel {
            projections,
            frequencies,
            phases,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (d, c) = (cfg.feature_dim, cfg.label_dim);
    let mut global = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labeler = LabelModel::draw(&mut global, d, c);
    let innovation = (1.0 - AR_COEF * AR_COEF).sqrt();
    let unit_uniform = 3f64.sqrt();

    let mut sequences = Vec::with_capacity(cfg.n_videos);
    for v in 0..cfg.n_videos {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(v as u64 + 1);
        let t_len = rng.gen_range(cfg.min_len..=cfg.max_len);

        let mut raw = vec![vec![0.0; d]; t_len];
        for t in 0..t_len {
            for j in 0..d {
                let eps = rng.gen_range(-unit_uniform..unit_uniform);
                raw[t][j] = if t == 0 {
                    eps
                } else {
                    AR_COEF * raw[t - 1][j] + innovation * eps
                };
            }
        }
        let features: Vec<Vec<f64>> = raw
            .iter()
            .map(|row| row.iter().map(|&x| round_f32(x)).collect())
            .collect();

        let mut labels = vec![vec![0.0; c]; t_len];
        for t in 0..t_len {
            let lo = t.saturating_sub(MA_WINDOW - 1);
            for k in 0..c {
                let proj = &labeler.projections[k];
                let ma = (lo..=t)
                    .map(|s| features[s].iter().zip(proj).map(|(x, p)| x * p).sum::<f64>())
                    .sum::<f64>()
                    / (t - lo + 1) as f64;
                let trend = (labeler.frequencies[k] * t as f64 + labeler.phases[k]).sin();
                let y = sigmoid(FEATURE_GAIN * ma + TREND_GAIN * trend);
                labels[t][k] = round_f32(y).clamp(0.0, 1.0);
            }
        }
        let mask = (0..t_len).map(|_| !rng.gen_bool(cfg.gap_prob)).collect();

        sequences.push(FeatureSequence::new(
            format!("video_{v:04}"),
            (0..t_len as u64).collect(),
            Matrix::from_rows(&features, d)?,
            Some(Matrix::from_rows(&labels, c)?),
            mask,
        )?);
    }
    Dataset::new(sequences, cfg.split)
}
