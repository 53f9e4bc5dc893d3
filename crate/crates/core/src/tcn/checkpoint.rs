//! TCNK checkpoint container.
//!
//! Layout (little-endian):
//! - magic `TCNK`, version byte, dtype byte (`0` f32, `1` f64)
//! - config: `u32` input_dim, hidden, num_blocks, kernel_size; `num_blocks × u32`
//!   dilations; `f64` dropout; `u32` head_hidden, output_dim; `u8` positional
//!   enabled, `u32` positional dim, `f64` positional base
//! - `u32` tensor count, then per tensor: `u16` name length, UTF-8 name,
//!   `u8` rank, `rank × u32` dims, values in the stored dtype
//!
//! Trailing bytes make the file corrupt.

use std::fs;
use std::path::Path;

use super::{TcnConfig, TcnModel};
use crate::bytes::ByteReader;
use crate::error::{Error, Result};
use crate::seqdata::PositionalEncodingConfig;
use crate::tensor::{DType, Scalar};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TCNK";
pub const CHECKPOINT_VERSION: u8 = 1;

/// A loaded model in whichever precision it was saved in.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyTcnModel {
    Standard(TcnModel<f32>),
    Wide(TcnModel<f64>),
}

impl AnyTcnModel {
    pub fn config(&self) -> &TcnConfig {
        match self {
            AnyTcnModel::Standard(m) => m.config(),
            AnyTcnModel::Wide(m) => m.config(),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            AnyTcnModel::Standard(_) => DType::F32,
            AnyTcnModel::Wide(_) => DType::F64,
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint<S: Scalar>(model: &TcnModel<S>) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.push(S::DTYPE.code());
    put_u32(&mut out, cfg.input_dim);
    put_u32(&mut out, cfg.hidden_channels);
    put_u32(&mut out, cfg.num_blocks);
    put_u32(&mut out, cfg.kernel_size);
    for &d in &cfg.dilation_schedule {
        put_u32(&mut out, d);
    }
    out.extend_from_slice(&cfg.dropout_rate.to_le_bytes());
    put_u32(&mut out, cfg.head_hidden);
    put_u32(&mut out, cfg.output_dim);
    out.push(u8::from(cfg.positional.enabled));
    put_u32(&mut out, cfg.positional.dim);
    out.extend_from_slice(&cfg.positional.base.to_le_bytes());

    put_u32(&mut out, model.params().len());
    for p in model.params().iter() {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(p.shape.len() as u8);
        for &d in &p.shape {
            put_u32(&mut out, d);
        }
        for &v in &p.value {
            v.write_le(&mut out);
        }
    }
    out
}

fn read_config(rd: &mut ByteReader<'_>) -> Result<TcnConfig> {
    let input_dim = rd.u32()? as usize;
    let hidden_channels = rd.u32()? as usize;
    let num_blocks = rd.u32()? as usize;
    let kernel_size = rd.u32()? as usize;
    rd.payload_len(num_blocks, 4)?;
    let dilation_schedule = (0..num_blocks)
        .map(|_| rd.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let dropout_rate = rd.f64()?;
    let head_hidden = rd.u32()? as usize;
    let output_dim = rd.u32()? as usize;
    let enabled = match rd.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("positional flag byte is {other}"))),
    };
    let dim = rd.u32()? as usize;
    let base = rd.f64()?;
    let cfg = TcnConfig {
        input_dim,
        hidden_channels,
        num_blocks,
        kernel_size,
        dilation_schedule,
        dropout_rate,
        head_hidden,
        output_dim,
        positional: PositionalEncodingConfig { dim, base, enabled },
    };
    cfg.validate()
        .map_err(|e| Error::Format(format!("checkpoint config invalid: {e}")))?;
    Ok(cfg)
}

fn read_tensors<S: Scalar, T: Scalar>(rd: &mut ByteReader<'_>, model: &mut TcnModel<T>) -> Result<()> {
    let count = rd.u32()? as usize;
    if count != model.params().len() {
        return Err(Error::Corrupt(format!(
            "shape manifest lists {count} tensors, config implies {}",
            model.params().len()
        )));
    }
    for id in model.params().ids().collect::<Vec<_>>() {
        let name_len = rd.u16()? as usize;
        let name = std::str::from_utf8(rd.take(name_len)?)
            .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = rd.u8()? as usize;
        let shape = (0..rank)
            .map(|_| rd.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let param = model.params().param(id);
        if name != param.name || shape != param.shape {
            return Err(Error::Corrupt(format!(
                "shape manifest mismatch: found `{name}` {shape:?}, expected `{}` {:?}",
                param.name, param.shape
            )));
        }
        let n = rd.payload_len(param.len(), S::DTYPE.size())?;
        let values: Vec<T> = rd
            .take(n)?
            .chunks_exact(S::DTYPE.size())
            .map(|b| T::cast(S::read_le(b).widen()))
            .collect();
        model.params_mut().value_mut(id).copy_from_slice(&values);
    }
    Ok(())
}

fn decode_as<S: Scalar>(rd: &mut ByteReader<'_>, cfg: TcnConfig) -> Result<TcnModel<S>> {
    let mut model = TcnModel::<S>::new(cfg)?;
    read_tensors::<S, S>(rd, &mut model)?;
    Ok(model)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<AnyTcnModel> {
    let mut rd = ByteReader::new(bytes, "checkpoint");
    let magic = rd
        .take(CHECKPOINT_MAGIC.len())
        .map_err(|_| Error::Corrupt("checkpoint truncated inside magic".into()))?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let version = rd.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let dtype_code = rd.u8()?;
    let dtype = DType::from_code(dtype_code)
        .ok_or_else(|| Error::Format(format!("unknown dtype code {dtype_code}")))?;
    let cfg = read_config(&mut rd)?;
    // Refuse to allocate for a config the remaining bytes cannot possibly hold.
    let scalars = cfg
        .num_parameters()
        .ok_or_else(|| Error::Corrupt("checkpoint config implies an impossible parameter count".into()))?;
    rd.payload_len(scalars, dtype.size())?;
    let model = match dtype {
        DType::F32 => AnyTcnModel::Standard(decode_as(&mut rd, cfg)?),
        DType::F64 => AnyTcnModel::Wide(decode_as(&mut rd, cfg)?),
    };
    rd.finish()?;
    Ok(model)
}

pub fn save_checkpoint<S: Scalar>(model: &TcnModel<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint_any(path: impl AsRef<Path>) -> Result<AnyTcnModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| e.in_file(path))
}

/// Loads a checkpoint and converts it to `S` if it was stored in the other precision.
pub fn load_checkpoint<S: Scalar>(path: impl AsRef<Path>) -> Result<TcnModel<S>> {
    Ok(match load_checkpoint_any(path)? {
        AnyTcnModel::Standard(m) => m.cast(),
        AnyTcnModel::Wide(m) => m.cast(),
    })
}
