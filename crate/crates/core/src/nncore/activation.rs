use rand::Rng;

use super::RngState;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Scalar};

pub fn relu_forward<S: Scalar>(x: &Matrix<S>) -> Matrix<S> {
    x.map(|v| if v > S::zero() { v } else { S::zero() })
}

/// Passes `upstream` where `x > 0`; the subgradient at exactly zero is 0.
pub fn relu_backward<S: Scalar>(x: &Matrix<S>, upstream: &Matrix<S>) -> Matrix<S> {
    debug_assert_eq!(x.shape(), upstream.shape());
    let data = x
        .as_slice()
        .iter()
        .zip(upstream.as_slice())
        .map(|(&xv, &g)| if xv > S::zero() { g } else { S::zero() })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data).expect("same shape")
}

/// Inverted dropout. Returns the output and, when units were actually dropped,
/// the per-entry multiplier (`0` or `1/(1-rate)`) needed for the backward pass.
pub fn dropout_forward<S: Scalar>(
    x: &Matrix<S>,
    rate: f64,
    training: bool,
    rng: &mut RngState,
) -> Result<(Matrix<S>, Option<Matrix<S>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = S::cast(1.0 / (1.0 - rate));
    let mut draw = rng.stream();
    let mut mask = Matrix::zeros(x.rows(), x.cols());
    for m in mask.as_mut_slice() {
        *m = if draw.gen_bool(rate) { S::zero() } else { keep };
    }
    let data = x
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .map(|(&v, &m)| v * m)
        .collect();
    Ok((Matrix::from_vec(x.rows(), x.cols(), data)?, Some(mask)))
}

pub fn dropout_backward<S: Scalar>(mask: Option<&Matrix<S>>, upstream: &Matrix<S>) -> Matrix<S> {
    match mask {
        None => upstream.clone(),
        Some(m) => {
            let data = upstream
                .as_slice()
                .iter()
                .zip(m.as_slice())
                .map(|(&g, &k)| g * k)
                .collect();
            Matrix::from_vec(upstream.rows(), upstream.cols(), data).expect("same shape")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        let x = Matrix::from_vec(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).as_slice(), &[0.0, 0.0, 2.0]);
        let pos = Matrix::from_vec(1, 2, vec![0.5, 3.0]).unwrap();
        assert_eq!(relu_forward(&pos), pos);
        let up = Matrix::from_vec(1, 3, vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(relu_backward(&x, &up).as_slice(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn dropout_identity_paths() {
        let x = Matrix::from_vec(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let mut rng = RngState::new(1);
        let (y, m) = dropout_forward(&x, 0.0, true, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(m.is_none());
        let (y, m) = dropout_forward(&x, 0.7, false, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(m.is_none());
        assert_eq!(rng.counter(), 0);
    }

    #[test]
    fn dropout_rate_range() {
        let x = Matrix::<f64>::zeros(1, 1);
        let mut rng = RngState::new(1);
        assert!(matches!(dropout_forward(&x, 1.0, true, &mut rng), Err(Error::Config(_))));
        assert!(matches!(dropout_forward(&x, -0.1, false, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn dropout_preserves_expectation() {
        let n = 100_000;
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| 1.0 + (i % 7) as f64).collect()).unwrap();
        let (y, mask) = dropout_forward(&x, 0.3, true, &mut RngState::new(11)).unwrap();
        let mean_x = x.as_slice().iter().sum::<f64>() / n as f64;
        let mean_y = y.as_slice().iter().sum::<f64>() / n as f64;
        assert!(((mean_y - mean_x) / mean_x).abs() < 0.02, "{mean_x} vs {mean_y}");
        let mask = mask.unwrap();
        let dropped = mask.as_slice().iter().filter(|&&m| m == 0.0).count() as f64 / n as f64;
        assert!((dropped - 0.3).abs() < 0.01);
    }

    #[test]
    fn dropout_mask_reproducible() {
        let x = Matrix::from_vec(4, 4, vec![1.0f64; 16]).unwrap();
        let a = dropout_forward(&x, 0.5, true, &mut RngState::with_counter(2, 3)).unwrap();
        let b = dropout_forward(&x, 0.5, true, &mut RngState::with_counter(2, 3)).unwrap();
        assert_eq!(a, b);
        let up = Matrix::from_vec(4, 4, vec![1.0f64; 16]).unwrap();
        assert_eq!(dropout_backward(a.1.as_ref(), &up), a.0);
    }
}
