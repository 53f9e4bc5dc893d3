//! Row-wise fully connected layer, `y = x Wᵀ + b`.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams<S> {
    /// `out × in`.
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> LinearParams<S> {
    pub fn view(&self) -> LinearView<'_, S> {
        LinearView {
            in_features: self.weights.cols(),
            out_features: self.weights.rows(),
            weights: self.weights.as_slice(),
            bias: &self.bias,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinearView<'a, S> {
    pub in_features: usize,
    pub out_features: usize,
    pub weights: &'a [S],
    pub bias: &'a [S],
}

impl<S> LinearView<'_, S> {
    fn check(&self, x_cols: usize) -> Result<()> {
        if self.weights.len() != self.in_features * self.out_features || self.bias.len() != self.out_features {
            return Err(Error::Shape(format!(
                "linear tensors ({}, {}) do not match {}x{}",
                self.weights.len(),
                self.bias.len(),
                self.out_features,
                self.in_features
            )));
        }
        if x_cols != self.in_features {
            return Err(Error::Shape(format!(
                "linear layer expects {} inputs, got {x_cols}",
                self.in_features
            )));
        }
        Ok(())
    }
}

pub fn linear_forward<S: Scalar>(x: &Matrix<S>, p: &LinearView<'_, S>) -> Result<Matrix<S>> {
    p.check(x.cols())?;
    let mut y = Matrix::zeros(x.rows(), p.out_features);
    for r in 0..x.rows() {
        let xr = x.row(r);
        for (o, out) in y.row_mut(r).iter_mut().enumerate() {
            let wr = &p.weights[o * p.in_features..(o + 1) * p.in_features];
            *out = p.bias[o] + wr.iter().zip(xr).map(|(&a, &b)| a * b).sum::<S>();
        }
    }
    Ok(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrads<S> {
    pub input: Matrix<S>,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

pub fn linear_backward<S: Scalar>(
    x: &Matrix<S>,
    p: &LinearView<'_, S>,
    upstream: &Matrix<S>,
) -> Result<LinearGrads<S>> {
    p.check(x.cols())?;
    if upstream.shape() != (x.rows(), p.out_features) {
        return Err(Error::Shape(format!(
            "linear backward: upstream {:?}, expected ({}, {})",
            upstream.shape(),
            x.rows(),
            p.out_features
        )));
    }
    let cin = p.in_features;
    let mut grad_x = Matrix::zeros(x.rows(), cin);
    let mut grad_w = vec![S::zero(); p.weights.len()];
    let mut grad_b = vec![S::zero(); p.out_features];
    for r in 0..x.rows() {
        let xr = x.row(r);
        let g = upstream.row(r);
        for (o, &go) in g.iter().enumerate() {
            grad_b[o] += go;
            let wr = &p.weights[o * cin..(o + 1) * cin];
            let gw = &mut grad_w[o * cin..(o + 1) * cin];
            for c in 0..cin {
                gw[c] += go * xr[c];
            }
            let gx = grad_x.row_mut(r);
            for c in 0..cin {
                gx[c] += go * wr[c];
            }
        }
    }
    Ok(LinearGrads {
        input: grad_x,
        weights: grad_w,
        bias: grad_b,
    })
}
