//! FSEQ1 container.
//!
//! Layout (little-endian):
//! - magic `FSEQ1` (5 bytes), version byte `0x01`
//! - `u32 T`, `u32 D`, `u32 C`, `u8 has_labels`
//! - `T × u64` timestamp indices
//! - `T × D` f32 features, row-major
//! - `T × C` f32 labels, row-major (only when `has_labels == 1`)
//! - `T × u8` annotation mask
//!
//! Any trailing bytes make the file corrupt. The video id is not stored; it is
//! taken from the file stem.

use std::fs;
use std::path::Path;

use super::FeatureSequence;
use crate::bytes::ByteReader;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const FSEQ_MAGIC: &[u8; 5] = b"FSEQ1";
pub const FSEQ_VERSION: u8 = 0x01;

pub fn encode_feature_sequence(seq: &FeatureSequence) -> Vec<u8> {
    let t = seq.len();
    let d = seq.feature_dim();
    let c = seq.label_dim().unwrap_or(0);
    let mut out = Vec::with_capacity(19 + t * (8 + 4 * (d + c) + 1));
    out.extend_from_slice(FSEQ_MAGIC);
    out.push(FSEQ_VERSION);
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.push(u8::from(seq.labels().is_some()));
    for &ts in seq.timestamp_indices() {
        out.extend_from_slice(&ts.to_le_bytes());
    }
    for &v in seq.features().as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if let Some(labels) = seq.labels() {
        for &v in labels.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.extend(seq.annotated_mask().iter().map(|&m| u8::from(m)));
    out
}

/// Parses an FSEQ1 buffer. With `check_labels` false the label block may hold
/// arbitrary values (prediction files).
pub fn decode_feature_sequence(
    bytes: &[u8],
    video_id: &str,
    check_labels: bool,
) -> Result<FeatureSequence> {
    let mut rd = ByteReader::new(bytes, "FSEQ1 file");
    let magic = rd
        .take(FSEQ_MAGIC.len())
        .map_err(|_| Error::Format("file too short for FSEQ1 magic".into()))?;
    if magic != FSEQ_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"FSEQ1\"")));
    }
    let version = rd.u8()?;
    if version != FSEQ_VERSION {
        return Err(Error::Format(format!("unsupported FSEQ1 version {version}")));
    }
    let t = rd.u32()? as usize;
    let d = rd.u32()? as usize;
    let c = rd.u32()? as usize;
    let has_labels = match rd.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("has_labels byte is {other}, expected 0 or 1"))),
    };

    let n = rd.payload_len(t, 8)?;
    let timestamps = rd
        .take(n)?
        .chunks_exact(8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let features = read_f32_matrix(&mut rd, t, d)?;
    let labels = if has_labels {
        Some(read_f32_matrix(&mut rd, t, c)?)
    } else {
        None
    };
    let n = rd.payload_len(t, 1)?;
    let mask = rd
        .take(n)?
        .iter()
        .enumerate()
        .map(|(r, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Corrupt(format!("mask byte {other} at row {r}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    rd.finish()?;

    if check_labels {
        FeatureSequence::new(video_id, timestamps, features, labels, mask)
    } else {
        FeatureSequence::new_unchecked_labels(video_id, timestamps, features, labels, mask)
    }
}

fn read_f32_matrix(rd: &mut ByteReader<'_>, rows: usize, cols: usize) -> Result<Matrix<f64>> {
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Corrupt(format!("matrix {rows}x{cols} overflows")))?;
    let n = rd.payload_len(count, 4)?;
    let data = rd
        .take(n)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn video_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_sequence(&bytes, &video_id_of(path), true).map_err(|e| e.in_file(path))
}

/// Loads an FSEQ1 file whose label block carries predictions (no `[0, 1]` check).
pub fn load_prediction_file(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_sequence(&bytes, &video_id_of(path), false).map_err(|e| e.in_file(path))
}

pub fn save_feature_file(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_feature_sequence(seq)).map_err(|e| Error::io(path, e))
}
