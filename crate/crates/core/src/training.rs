//! Length-normalized per-video MSE, plain SGD, and the epoch loop with
//! gradient accumulation over ragged-length videos.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, PredictionMatrix};
use crate::nncore::{ParameterStore, RngState};
use crate::seqdata::{Dataset, FeatureSequence};
use crate::tcn::TcnModel;
use crate::tensor::{Matrix, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// f32
    Standard,
    /// f64
    Wide,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Standard => "standard",
            Precision::Wide => "wide",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Precision::Standard),
            "wide" => Ok(Precision::Wide),
            other => Err(Error::Config(format!(
                "unknown precision `{other}` (expected standard or wide)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Videos per optimizer step.
    pub batch_size: usize,
    /// When false every video gets its own step, regardless of `batch_size`.
    pub accumulation: bool,
    pub seed: u64,
    /// Which scalar type callers should instantiate the model with.
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 5e-3,
            batch_size: 32,
            accumulation: true,
            seed: 0,
            precision: Precision::Standard,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.epochs == 0 {
            problems.push("epochs must be >= 1".to_string());
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            problems.push(format!("learning rate {} must be finite and >= 0", self.learning_rate));
        }
        if self.batch_size == 0 {
            problems.push("batch size must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    fn step_size(&self) -> usize {
        if self.accumulation {
            self.batch_size
        } else {
            1
        }
    }
}

/// One video's term: `sum (ŷ - y)^2 / (C · T)`, and its gradient `2 (ŷ - y) / (C · T)`.
pub fn mse_loss<S: Scalar>(pred: &Matrix<S>, target: &Matrix<S>) -> Result<(f64, Matrix<S>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.is_empty() || pred.cols() == 0 {
        return Err(Error::EmptyInput("loss over an empty sequence".into()));
    }
    let n = (pred.rows() * pred.cols()) as f64;
    let scale = S::cast(2.0 / n);
    let mut sum = 0.0;
    let grad = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &y)| {
            let diff = p - y;
            sum += diff.widen() * diff.widen();
            diff * scale
        })
        .collect();
    Ok((sum / n, Matrix::from_vec(pred.rows(), pred.cols(), grad)?))
}

/// Sum (not mean) of per-video [`mse_loss`] terms over a batch.
pub fn batch_loss<S: Scalar>(videos: &[(Matrix<S>, Matrix<S>)]) -> Result<f64> {
    if videos.is_empty() {
        return Err(Error::EmptyInput("batch has no videos".into()));
    }
    videos
        .iter()
        .map(|(p, y)| mse_loss(p, y).map(|(l, _)| l))
        .sum()
}

/// `θ ← θ - lr ∇θ`, then zeroes the gradients. Refuses to move on a
/// non-finite gradient.
pub fn sgd_step<S: Scalar>(store: &mut ParameterStore<S>, lr: f64) -> Result<()> {
    if let Some(p) = store.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::Divergence(format!("gradient of `{}`", p.name)));
    }
    let lr = S::cast(lr);
    for p in store.iter_mut() {
        for (v, g) in p.value.iter_mut().zip(p.grad.iter_mut()) {
            *v -= lr * *g;
            *g = S::zero();
        }
    }
    Ok(())
}

fn targets<S: Scalar>(seq: &FeatureSequence, output_dim: usize) -> Result<Matrix<S>> {
    let labels = seq
        .labels()
        .ok_or_else(|| Error::Validation(format!("video `{}` has no labels", seq.video_id())))?;
    if labels.cols() != output_dim {
        return Err(Error::Shape(format!(
            "video `{}` has {} label columns, model predicts {output_dim}",
            seq.video_id(),
            labels.cols()
        )));
    }
    Ok(labels.cast())
}

/// Forward and backward for one video in training mode; gradients are added
/// to the model's store. Returns the video's loss term.
pub fn accumulate_video_gradient<S: Scalar>(
    model: &mut TcnModel<S>,
    seq: &FeatureSequence,
    rng: &mut RngState,
) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptyInput(format!("video `{}` has no rows", seq.video_id())));
    }
    let target = targets::<S>(seq, model.config().output_dim)?;
    let trace = model
        .forward_traced(&seq.features().cast(), true, rng)
        .map_err(|e| match e {
            Error::Shape(m) => Error::Shape(format!("video `{}`: {m}", seq.video_id())),
            e => e,
        })?;
    let (loss, grad) = mse_loss(trace.output(), &target)?;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("loss of video `{}`", seq.video_id())));
    }
    model.backward(&trace, &grad)?;
    Ok(loss)
}

/// Inference-mode predictions for every sequence, widened to f64.
pub fn predict_dataset<S: Scalar>(model: &TcnModel<S>, data: &Dataset) -> Result<Vec<PredictionMatrix>> {
    let mut rng = RngState::new(0);
    data.sequences()
        .iter()
        .map(|seq| {
            let values = crate::tcn::model_forward(seq, model, false, &mut rng)?;
            Ok(PredictionMatrix {
                video_id: seq.video_id().to_string(),
                values: values.cast(),
                timestamp_indices: seq.timestamp_indices().to_vec(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-video loss terms seen this epoch.
    pub mean_loss: f64,
    pub val_m_rho: Option<f64>,
    pub seconds: f64,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} loss={:.9}", self.epoch, self.mean_loss)?;
        match self.val_m_rho {
            Some(m) => write!(f, " val_m_rho={m:.6}")?,
            None => write!(f, " val_m_rho=NA")?,
        }
        write!(f, " seconds={:.3}", self.seconds)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl fmt::Display for TrainLog {
    /// One `key=value` record per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.epochs {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

pub fn train<S: Scalar>(model: TcnModel<S>, data: &Dataset, cfg: &TrainConfig) -> Result<(TcnModel<S>, TrainLog)> {
    train_with_validation(model, data, None, cfg, |_| {})
}

/// The full loop. Each epoch visits the videos in a seeded permutation; every
/// `batch_size` videos contribute accumulated gradients to one SGD step.
/// `on_epoch` sees each record as it is produced.
pub fn train_with_validation<S: Scalar>(
    mut model: TcnModel<S>,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(TcnModel<S>, TrainLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("training set has no videos".into()));
    }
    let mut rng = RngState::new(cfg.seed);
    let mut shuffle = rng.stream();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();
    model.params_mut().zero_grads();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.step_size()) {
            for &i in chunk {
                total += accumulate_video_gradient(&mut model, &data.sequences()[i], &mut rng)?;
            }
            sgd_step(model.params_mut(), cfg.learning_rate)?;
        }
        let val_m_rho = match validation {
            Some(val) => Some(evaluate(val, &predict_dataset(&model, val)?)?.m_rho),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            mean_loss: total / data.len() as f64,
            val_m_rho,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.epochs.push(record);
    }
    Ok((model, log))
}
