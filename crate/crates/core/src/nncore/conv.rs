//! Dilated causal 1-D convolution with weight-normalized filters.
//!
//! For output channel `o` at step `s`:
//!
//! ```text
//! y[s][o] = bias[o] + sum_{i<k} sum_c w[o][c][i] * x[s - d*i][c]
//! ```
//!
//! with `x[negative] = 0` (left zero-padding of `(k-1)*d`, so `len(y) == len(x)`)
//! and `w[o] = gain[o] * v[o] / ||v[o]||`, the norm taken over the whole
//! `in_channels × k` row.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
}

impl ConvShape {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.dilation == 0 {
            return Err(Error::Config(format!(
                "kernel size and dilation must be >= 1, got k={} d={}",
                self.kernel_size, self.dilation
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("conv channel counts must be >= 1".into()));
        }
        Ok(())
    }

    /// Length of one weight-norm row, `in_channels * kernel_size`.
    pub fn row_len(&self) -> usize {
        self.in_channels * self.kernel_size
    }

    pub fn direction_len(&self) -> usize {
        self.out_channels * self.row_len()
    }

    /// How many steps back the last tap reads, `(k-1)*d`.
    pub fn span(&self) -> usize {
        (self.kernel_size - 1) * self.dilation
    }
}

/// Owned convolution parameters. Direction layout is `[out][in][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DilatedConvParams<S> {
    pub shape: ConvShape,
    pub direction_weights: Vec<S>,
    pub gains: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> DilatedConvParams<S> {
    pub fn new(shape: ConvShape, direction_weights: Vec<S>, gains: Vec<S>, bias: Vec<S>) -> Result<Self> {
        let p = DilatedConvParams {
            shape,
            direction_weights,
            gains,
            bias,
        };
        p.view().check()?;
        Ok(p)
    }

    pub fn view(&self) -> ConvView<'_, S> {
        ConvView {
            shape: self.shape,
            direction: &self.direction_weights,
            gains: &self.gains,
            bias: &self.bias,
        }
    }
}

/// Borrowed convolution parameters, typically slices of a parameter store.
#[derive(Clone, Copy, Debug)]
pub struct ConvView<'a, S> {
    pub shape: ConvShape,
    pub direction: &'a [S],
    pub gains: &'a [S],
    pub bias: &'a [S],
}

impl<S: Scalar> ConvView<'_, S> {
    fn check(&self) -> Result<()> {
        self.shape.validate()?;
        let sh = &self.shape;
        if self.direction.len() != sh.direction_len()
            || self.gains.len() != sh.out_channels
            || self.bias.len() != sh.out_channels
        {
            return Err(Error::Shape(format!(
                "conv tensors ({}, {}, {}) do not match shape {sh:?}",
                self.direction.len(),
                self.gains.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// `g * v / ||v||`.
pub fn weight_norm_effective<S: Scalar>(v: &[S], g: S) -> Result<Vec<S>> {
    let norm = v.iter().map(|&x| x * x).sum::<S>().sqrt();
    if !(norm > S::zero()) {
        return Err(Error::Singularity("direction vector has zero norm".into()));
    }
    let scale = g / norm;
    Ok(v.iter().map(|&x| x * scale).collect())
}

/// Effective filter `[out][in][k]` and the per-row direction norms.
pub fn effective_weights<S: Scalar>(p: &ConvView<'_, S>) -> Result<(Vec<S>, Vec<S>)> {
    p.check()?;
    let row_len = p.shape.row_len();
    let mut w = Vec::with_capacity(p.direction.len());
    let mut norms = Vec::with_capacity(p.shape.out_channels);
    for (o, row) in p.direction.chunks(row_len).enumerate() {
        let eff = weight_norm_effective(row, p.gains[o])
            .map_err(|_| Error::Singularity(format!("output channel {o} has a zero direction row")))?;
        norms.push(row.iter().map(|&x| x * x).sum::<S>().sqrt());
        w.extend(eff);
    }
    Ok((w, norms))
}

/// Regroups `[out][in][k]` into per-tap `out × in` blocks.
fn per_tap<S: Scalar>(w: &[S], sh: &ConvShape) -> Vec<Vec<S>> {
    let (cin, cout, k) = (sh.in_channels, sh.out_channels, sh.kernel_size);
    (0..k)
        .map(|i| {
            let mut tap = Vec::with_capacity(cout * cin);
            for o in 0..cout {
                for c in 0..cin {
                    tap.push(w[(o * cin + c) * k + i]);
                }
            }
            tap
        })
        .collect()
}

pub fn dilated_causal_conv_forward<S: Scalar>(x: &Matrix<S>, p: &ConvView<'_, S>) -> Result<Matrix<S>> {
    let sh = p.shape;
    if x.cols() != sh.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            sh.in_channels,
            x.cols()
        )));
    }
    let (w, _) = effective_weights(p)?;
    let taps = per_tap(&w, &sh);
    let (cin, cout) = (sh.in_channels, sh.out_channels);
    let mut y = Matrix::zeros(x.rows(), cout);
    for s in 0..x.rows() {
        let out = y.row_mut(s);
        out.copy_from_slice(p.bias);
        for (i, tap) in taps.iter().enumerate() {
            let back = i * sh.dilation;
            if back > s {
                break;
            }
            let xr = x.row(s - back);
            for (o, acc) in out.iter_mut().enumerate() {
                let wr = &tap[o * cin..(o + 1) * cin];
                *acc += wr.iter().zip(xr).map(|(&a, &b)| a * b).sum::<S>();
            }
        }
    }
    Ok(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<S> {
    pub input: Matrix<S>,
    pub direction: Vec<S>,
    pub gains: Vec<S>,
    pub bias: Vec<S>,
}

pub fn dilated_causal_conv_backward<S: Scalar>(
    x: &Matrix<S>,
    p: &ConvView<'_, S>,
    upstream: &Matrix<S>,
) -> Result<ConvGrads<S>> {
    let sh = p.shape;
    if x.cols() != sh.in_channels || upstream.cols() != sh.out_channels || upstream.rows() != x.rows() {
        return Err(Error::Shape(format!(
            "conv backward: input {:?} and upstream {:?} inconsistent with {sh:?}",
            x.shape(),
            upstream.shape()
        )));
    }
    let (w, norms) = effective_weights(p)?;
    let (cin, cout, k) = (sh.in_channels, sh.out_channels, sh.kernel_size);

    let mut grad_x = Matrix::zeros(x.rows(), cin);
    let mut grad_w = vec![S::zero(); w.len()];
    let mut grad_b = vec![S::zero(); cout];
    for s in 0..x.rows() {
        let g = upstream.row(s);
        for (b, &gv) in grad_b.iter_mut().zip(g) {
            *b += gv;
        }
        for i in 0..k {
            let back = i * sh.dilation;
            if back > s {
                break;
            }
            let src = s - back;
            for (o, &go) in g.iter().enumerate() {
                if go == S::zero() {
                    continue;
                }
                let base = o * cin * k + i;
                let xr = x.row(src);
                for c in 0..cin {
                    grad_w[base + c * k] += go * xr[c];
                }
                let gx = grad_x.row_mut(src);
                for c in 0..cin {
                    gx[c] += go * w[base + c * k];
                }
            }
        }
    }

    // w = g v / n  =>  dg = <gw, v>/n,  dv = (g/n) gw - (g <gw, v> / n^3) v
    let row_len = sh.row_len();
    let mut grad_v = vec![S::zero(); w.len()];
    let mut grad_g = vec![S::zero(); cout];
    for o in 0..cout {
        let range = o * row_len..(o + 1) * row_len;
        let v = &p.direction[range.clone()];
        let gw = &grad_w[range.clone()];
        let n = norms[o];
        let g = p.gains[o];
        let dot = v.iter().zip(gw).map(|(&a, &b)| a * b).sum::<S>();
        grad_g[o] = dot / n;
        let coef = g * dot / (n * n * n);
        for (dv, (&vi, &gwi)) in grad_v[range].iter_mut().zip(v.iter().zip(gw)) {
            *dv = g / n * gwi - coef * vi;
        }
    }

    Ok(ConvGrads {
        input: grad_x,
        direction: grad_v,
        gains: grad_g,
        bias: grad_b,
    })
}
