//! Per-video feature sequences: ingestion, missing-timestamp handling,
//! positional encoding, and a synthetic dataset generator.

mod fseq;
mod positional;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

pub use fseq::{
    decode_feature_sequence, encode_feature_sequence, load_feature_file, load_prediction_file,
    save_feature_file, FSEQ_MAGIC, FSEQ_VERSION,
};
pub use positional::{concat_positional, positional_encode, PositionalEncodingConfig};
pub use synth::{generate_synthetic, SynthConfig};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Number of expression columns in the reference annotation scheme.
pub const DEFAULT_LABEL_DIM: usize = 15;

/// One video: per-timestamp features, optional labels in `[0, 1]`, and the
/// original (6 Hz) frame index of every row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    video_id: String,
    timestamp_indices: Vec<u64>,
    features: Matrix<f64>,
    labels: Option<Matrix<f64>>,
    annotated_mask: Vec<bool>,
}

impl FeatureSequence {
    pub fn new(
        video_id: impl Into<String>,
        timestamp_indices: Vec<u64>,
        features: Matrix<f64>,
        labels: Option<Matrix<f64>>,
        annotated_mask: Vec<bool>,
    ) -> Result<Self> {
        let seq = Self::new_unchecked_labels(
            video_id,
            timestamp_indices,
            features,
            labels,
            annotated_mask,
        )?;
        if let Some(labels) = &seq.labels {
            check_label_range(labels)?;
        }
        Ok(seq)
    }

    /// Like [`FeatureSequence::new`] but labels may hold any finite value.
    /// Used for prediction files, whose label slot carries raw model output.
    pub fn new_unchecked_labels(
        video_id: impl Into<String>,
        timestamp_indices: Vec<u64>,
        features: Matrix<f64>,
        labels: Option<Matrix<f64>>,
        annotated_mask: Vec<bool>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        let t = timestamp_indices.len();
        if features.rows() != t {
            return Err(Error::Shape(format!(
                "video `{video_id}`: {} feature rows for {t} timestamps",
                features.rows()
            )));
        }
        if annotated_mask.len() != t {
            return Err(Error::Shape(format!(
                "video `{video_id}`: mask length {} for {t} timestamps",
                annotated_mask.len()
            )));
        }
        if let Some(labels) = &labels {
            if labels.rows() != t {
                return Err(Error::Shape(format!(
                    "video `{video_id}`: {} label rows for {t} timestamps",
                    labels.rows()
                )));
            }
        }
        if let Some(w) = timestamp_indices.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "video `{video_id}`: timestamp indices not strictly increasing at row {}",
                w + 1
            )));
        }
        Ok(FeatureSequence {
            video_id,
            timestamp_indices,
            features,
            labels,
            annotated_mask,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn set_video_id(&mut self, id: impl Into<String>) {
        self.video_id = id.into();
    }

    pub fn timestamp_indices(&self) -> &[u64] {
        &self.timestamp_indices
    }

    pub fn features(&self) -> &Matrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&Matrix<f64>> {
        self.labels.as_ref()
    }

    pub fn annotated_mask(&self) -> &[bool] {
        &self.annotated_mask
    }

    /// Sequence length `T`.
    pub fn len(&self) -> usize {
        self.timestamp_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamp_indices.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label_dim(&self) -> Option<usize> {
        self.labels.as_ref().map(Matrix::cols)
    }

    pub fn into_parts(self) -> (String, Vec<u64>, Matrix<f64>, Option<Matrix<f64>>, Vec<bool>) {
        (
            self.video_id,
            self.timestamp_indices,
            self.features,
            self.labels,
            self.annotated_mask,
        )
    }
}

fn check_label_range(labels: &Matrix<f64>) -> Result<()> {
    for r in 0..labels.rows() {
        for (c, &v) in labels.row(r).iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "label at row {r}, column {c} is {v}, outside [0, 1]"
                )));
            }
        }
    }
    Ok(())
}

/// Removes the rows whose annotation mask is false. Surviving rows keep their
/// original timestamp indices.
pub fn drop_unannotated(seq: &FeatureSequence) -> FeatureSequence {
    let mask = &seq.annotated_mask;
    let keep = |r: usize| mask[r];
    FeatureSequence {
        video_id: seq.video_id.clone(),
        timestamp_indices: seq
            .timestamp_indices
            .iter()
            .zip(mask)
            .filter_map(|(&t, &m)| m.then_some(t))
            .collect(),
        features: seq.features.select_rows(keep),
        labels: seq.labels.as_ref().map(|l| l.select_rows(keep)),
        annotated_mask: vec![true; mask.iter().filter(|&&m| m).count()],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split `{other}` (expected train, validation or test)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    sequences: Vec<FeatureSequence>,
    split: Split,
}

impl Dataset {
    pub fn new(sequences: Vec<FeatureSequence>, split: Split) -> Result<Self> {
        let mut seen = HashSet::new();
        for seq in &sequences {
            if !seen.insert(seq.video_id()) {
                return Err(Error::Validation(format!(
                    "duplicate video id `{}` in {split} split",
                    seq.video_id()
                )));
            }
        }
        Ok(Dataset { sequences, split })
    }

    pub fn sequences(&self) -> &[FeatureSequence] {
        &self.sequences
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// Number of videos `N_v`.
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn into_sequences(self) -> Vec<FeatureSequence> {
        self.sequences
    }

    /// Applies `f` to every sequence, keeping the split.
    pub fn map(&self, f: impl Fn(&FeatureSequence) -> Result<FeatureSequence>) -> Result<Dataset> {
        let sequences = self.sequences.iter().map(f).collect::<Result<Vec<_>>>()?;
        Dataset::new(sequences, self.split)
    }
}
