//! Per-video, per-expression Pearson correlation, the video-then-expression
//! averaged score built on it, and weighted-average ensembling.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seqdata::{Dataset, FeatureSequence};
use crate::tensor::Matrix;

/// Predictions for one video, aligned row-for-row with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionMatrix {
    pub video_id: String,
    pub values: Matrix<f64>,
    pub timestamp_indices: Vec<u64>,
}

impl PredictionMatrix {
    /// Packs predictions into a sequence whose label slot holds the values
    /// (zero feature columns, all rows annotated).
    pub fn to_sequence(&self) -> Result<FeatureSequence> {
        FeatureSequence::new_unchecked_labels(
            self.video_id.clone(),
            self.timestamp_indices.clone(),
            Matrix::zeros(self.values.rows(), 0),
            Some(self.values.clone()),
            vec![true; self.values.rows()],
        )
    }

    pub fn from_sequence(seq: &FeatureSequence) -> Result<Self> {
        let values = seq.labels().cloned().ok_or_else(|| {
            Error::Validation(format!("prediction file for `{}` has no value block", seq.video_id()))
        })?;
        Ok(PredictionMatrix {
            video_id: seq.video_id().to_string(),
            values,
            timestamp_indices: seq.timestamp_indices().to_vec(),
        })
    }

    pub fn clamped(&self) -> Self {
        PredictionMatrix {
            values: self.values.map(|v| v.clamp(0.0, 1.0)),
            ..self.clone()
        }
    }
}

/// Pearson correlation of two equal-length vectors, computed two-pass
/// (means first, then centered sums). `None` when either vector is constant.
pub fn pearson_rho(y: &[f64], yhat: &[f64]) -> Result<Option<f64>> {
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!(
            "correlation of vectors with lengths {} and {}",
            y.len(),
            yhat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Shape(format!(
            "correlation needs at least 2 points, got {}",
            y.len()
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(y) || constant(yhat) {
        return Ok(None);
    }
    let n = y.len() as f64;
    let mean_y = y.iter().sum::<f64>() / n;
    let mean_p = yhat.iter().sum::<f64>() / n;
    let (mut cov, mut var_y, mut var_p) = (0.0, 0.0, 0.0);
    for (&a, &b) in y.iter().zip(yhat) {
        let (da, db) = (a - mean_y, b - mean_p);
        cov += da * db;
        var_y += da * da;
        var_p += db * db;
    }
    let denom = (var_y * var_p).sqrt();
    if !(denom > 0.0) {
        return Ok(None);
    }
    let rho = cov / denom;
    debug_assert!(rho.abs() <= 1.0 + 1e-12, "rho overshoot {rho}");
    Ok(Some(rho.clamp(-1.0, 1.0)))
}

/// Mean over videos of the mean over expressions. An undefined entry adds 0
/// to its video's sum while the divisor stays the video's expression count.
/// Returns the score and the number of undefined entries.
pub fn m_rho(per_video: &[Vec<Option<f64>>]) -> Result<(f64, usize)> {
    if per_video.is_empty() {
        return Err(Error::EmptyInput("no videos to average".into()));
    }
    let mut undefined = 0;
    let mut outer = 0.0;
    for (j, rhos) in per_video.iter().enumerate() {
        if rhos.is_empty() {
            return Err(Error::EmptyInput(format!("video {j} has no expressions")));
        }
        let mut inner = 0.0;
        for r in rhos {
            match r {
                Some(v) => inner += v,
                None => undefined += 1,
            }
        }
        outer += inner / rhos.len() as f64;
    }
    Ok((outer / per_video.len() as f64, undefined))
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoScores {
    pub video_id: String,
    /// One entry per expression; `None` marks an undefined correlation.
    pub rhos: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub per_video: Vec<VideoScores>,
    pub m_rho: f64,
    pub undefined_count: usize,
}

impl EvaluationReport {
    pub fn summary_line(&self) -> String {
        format!("M_rho={:.6} undefined={}", self.m_rho, self.undefined_count)
    }
}

impl fmt::Display for EvaluationReport {
    /// Per-video table (`NA` for undefined entries) followed by the summary line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.per_video.iter().map(|v| v.rhos.len()).max().unwrap_or(0);
        write!(f, "video_id\tmean_rho")?;
        for c in 0..width {
            write!(f, "\trho_{c}")?;
        }
        writeln!(f)?;
        for v in &self.per_video {
            let mean = v.rhos.iter().map(|r| r.unwrap_or(0.0)).sum::<f64>() / v.rhos.len().max(1) as f64;
            write!(f, "{}\t{mean:.6}", v.video_id)?;
            for r in &v.rhos {
                match r {
                    Some(x) => write!(f, "\t{x:.6}")?,
                    None => write!(f, "\tNA")?,
                }
            }
            writeln!(f)?;
        }
        writeln!(f, "{}", self.summary_line())
    }
}

fn score_video(seq: &FeatureSequence, pred: &PredictionMatrix) -> Result<VideoScores> {
    let id = seq.video_id();
    let align = |reason: String| Error::Alignment {
        video: id.to_string(),
        reason,
    };
    let labels = seq
        .labels()
        .ok_or_else(|| Error::Validation(format!("video `{id}` has no labels to score against")))?;
    if pred.values.rows() != labels.rows() {
        return Err(align(format!(
            "{} prediction rows vs {} label rows",
            pred.values.rows(),
            labels.rows()
        )));
    }
    if pred.values.cols() != labels.cols() {
        return Err(align(format!(
            "{} prediction columns vs {} label columns",
            pred.values.cols(),
            labels.cols()
        )));
    }
    if pred.timestamp_indices != seq.timestamp_indices() {
        return Err(align("timestamp indices differ".into()));
    }
    let rhos = (0..labels.cols())
        .map(|c| pearson_rho(&labels.column(c), &pred.values.column(c)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| align(e.to_string()))?;
    Ok(VideoScores {
        video_id: id.to_string(),
        rhos,
    })
}

/// Scores every labeled video against its prediction (matched by video id).
/// Videos are scored in parallel and aggregated in dataset order.
pub fn evaluate(dataset: &Dataset, predictions: &[PredictionMatrix]) -> Result<EvaluationReport> {
    let by_id: HashMap<&str, &PredictionMatrix> =
        predictions.iter().map(|p| (p.video_id.as_str(), p)).collect();
    let per_video = dataset
        .sequences()
        .par_iter()
        .filter(|seq| seq.labels().is_some())
        .map(|seq| {
            let pred = by_id.get(seq.video_id()).ok_or_else(|| Error::Alignment {
                video: seq.video_id().to_string(),
                reason: "no prediction for this video".into(),
            })?;
            score_video(seq, pred)
        })
        .collect::<Result<Vec<_>>>()?;
    let rhos: Vec<Vec<Option<f64>>> = per_video.iter().map(|v| v.rhos.clone()).collect();
    let (m_rho, undefined_count) = m_rho(&rhos)?;
    Ok(EvaluationReport {
        per_video,
        m_rho,
        undefined_count,
    })
}

/// `lambda · s1 + (1 - lambda) · s2`, per video (matched by id, output in `s1`
/// order). The endpoints return the corresponding input exactly.
pub fn ensemble(s1: &[PredictionMatrix], s2: &[PredictionMatrix], lambda: f64) -> Result<Vec<PredictionMatrix>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("ensemble lambda {lambda} outside [0, 1]")));
    }
    if s1.len() != s2.len() {
        return Err(Error::Alignment {
            video: "*".into(),
            reason: format!("prediction sets hold {} and {} videos", s1.len(), s2.len()),
        });
    }
    let by_id: HashMap<&str, &PredictionMatrix> = s2.iter().map(|p| (p.video_id.as_str(), p)).collect();
    s1.iter()
        .map(|a| {
            let align = |reason: &str| Error::Alignment {
                video: a.video_id.clone(),
                reason: reason.to_string(),
            };
            let b = by_id.get(a.video_id.as_str()).ok_or_else(|| align("missing from second set"))?;
            if a.values.shape() != b.values.shape() {
                return Err(align("prediction shapes differ"));
            }
            if a.timestamp_indices != b.timestamp_indices {
                return Err(align("timestamp indices differ"));
            }
            let values = if lambda == 1.0 {
                a.values.clone()
            } else if lambda == 0.0 {
                b.values.clone()
            } else {
                let data = a
                    .values
                    .as_slice()
                    .iter()
                    .zip(b.values.as_slice())
                    .map(|(&x, &y)| lambda * x + (1.0 - lambda) * y)
                    .collect();
                Matrix::from_vec(a.values.rows(), a.values.cols(), data)?
            };
            Ok(PredictionMatrix {
                video_id: a.video_id.clone(),
                values,
                timestamp_indices: a.timestamp_indices.clone(),
            })
        })
        .collect()
}
