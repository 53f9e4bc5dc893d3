//! Sinusoidal encoding of original frame indices, concatenated to features.

use super::FeatureSequence;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionalEncodingConfig {
    /// Encoding width; must be even.
    pub dim: usize,
    pub base: f64,
    pub enabled: bool,
}

impl Default for PositionalEncodingConfig {
    fn default() -> Self {
        PositionalEncodingConfig {
            dim: 16,
            base: 10000.0,
            enabled: true,
        }
    }
}

impl PositionalEncodingConfig {
    pub fn disabled() -> Self {
        PositionalEncodingConfig {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || !self.dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "positional encoding dim must be even and positive, got {}",
                self.dim
            )));
        }
        if !(self.base > 1.0) || !self.base.is_finite() {
            return Err(Error::Config(format!(
                "positional encoding base must be a finite value > 1, got {}",
                self.base
            )));
        }
        Ok(())
    }

    /// Columns this config appends to a feature matrix.
    pub fn added_columns(&self) -> usize {
        if self.enabled {
            self.dim
        } else {
            0
        }
    }
}

/// `pe[2m] = sin(t / base^(2m/dim))`, `pe[2m+1] = cos(t / base^(2m/dim))`.
pub fn positional_encode(t: u64, cfg: &PositionalEncodingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.dim);
    for m in 0..cfg.dim / 2 {
        let divisor = cfg.base.powf((2 * m) as f64 / cfg.dim as f64);
        let angle = t as f64 / divisor;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

/// Appends `positional_encode(timestamp)` to every feature row. A disabled
/// config returns the sequence unchanged.
pub fn concat_positional(
    seq: &FeatureSequence,
    cfg: &PositionalEncodingConfig,
) -> Result<FeatureSequence> {
    if !cfg.enabled {
        return Ok(seq.clone());
    }
    cfg.validate()?;
    if seq.is_empty() {
        return Err(Error::EmptyInput(format!(
            "video `{}` has no rows to encode",
            seq.video_id()
        )));
    }
    let rows = seq
        .timestamp_indices()
        .iter()
        .map(|&t| positional_encode(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let encoding = Matrix::from_rows(&rows, cfg.dim)?;
    let features = seq.features().hstack(&encoding)?;
    FeatureSequence::new_unchecked_labels(
        seq.video_id(),
        seq.timestamp_indices().to_vec(),
        features,
        seq.labels().cloned(),
        seq.annotated_mask().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize) -> PositionalEncodingConfig {
        PositionalEncodingConfig {
            dim,
            ..Default::default()
        }
    }

    #[test]
    fn zero_timestamp_alternates() {
        let pe = positional_encode(0, &cfg(8)).unwrap();
        assert_eq!(pe, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn unit_timestamp_first_pair() {
        let pe = positional_encode(1, &cfg(2)).unwrap();
        assert_eq!(pe, vec![1f64.sin(), 1f64.cos()]);
    }

    #[test]
    fn second_pair_uses_divisor_100() {
        let pe = positional_encode(10000, &cfg(4)).unwrap();
        assert!((pe[2] - 100f64.sin()).abs() < 1e-12);
        assert!((pe[3] - 100f64.cos()).abs() < 1e-12);
        assert!((pe[0] - 10000f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(matches!(positional_encode(3, &cfg(5)), Err(Error::Config(_))));
        let bad_base = PositionalEncodingConfig {
            base: 1.0,
            ..Default::default()
        };
        assert!(matches!(positional_encode(3, &bad_base), Err(Error::Config(_))));
    }

    #[test]
    fn concat_appends_suffix_and_keeps_labels() {
        let labels = Matrix::from_vec(2, 1, vec![0.1, 0.2]).unwrap();
        let seq = FeatureSequence::new(
            "v",
            vec![0, 7],
            Matrix::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap(),
            Some(labels.clone()),
            vec![true, true],
        )
        .unwrap();
        let out = concat_positional(&seq, &cfg(2)).unwrap();
        assert_eq!(out.feature_dim(), 4);
        assert_eq!(out.features().row(0), &[5.0, 6.0, 0.0, 1.0]);
        assert_eq!(out.features().row(1), &[7.0, 8.0, 7f64.sin(), 7f64.cos()]);
        assert_eq!(out.labels(), Some(&labels));
        assert_eq!(out.timestamp_indices(), &[0, 7]);

        let off = concat_positional(&seq, &PositionalEncodingConfig::disabled()).unwrap();
        assert_eq!(off, seq);
    }

    #[test]
    fn concat_rejects_empty() {
        let seq = FeatureSequence::new("v", vec![], Matrix::zeros(0, 3), None, vec![]).unwrap();
        assert!(matches!(concat_positional(&seq, &cfg(2)), Err(Error::EmptyInput(_))));
    }
}
