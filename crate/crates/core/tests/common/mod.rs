//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::time::{Duration, Instant};

use evtcn::nncore::{ParameterStore, RngState};
use evtcn::seqdata::{concat_positional, drop_unannotated, generate_synthetic, SynthConfig};
use evtcn::training::{mse_loss, sgd_step};
use evtcn::{evaluate, train, Dataset, FeatureSequence, Matrix, PositionalEncodingConfig, Split, TcnConfig, TcnModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn small_config(input_dim: usize, hidden: usize, blocks: usize, kernel: usize, output: usize) -> TcnConfig {
    TcnConfig {
        input_dim,
        hidden_channels: hidden,
        kernel_size: kernel,
        head_hidden: hidden,
        dropout_rate: 0.0,
        ..TcnConfig::new(input_dim, output, PositionalEncodingConfig::disabled()).with_blocks(blocks)
    }
}

/// Plain scalar-loop Pearson correlation; `None` for a zero-variance input.
pub fn pearson_oracle(y: &[f64], yhat: &[f64]) -> Option<f64> {
    let n = y.len() as f64;
    let mut my = 0.0;
    let mut mh = 0.0;
    for i in 0..y.len() {
        my += y[i];
        mh += yhat[i];
    }
    my /= n;
    mh /= n;
    let (mut num, mut sy, mut sh) = (0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let a = y[i] - my;
        let b = yhat[i] - mh;
        num += a * b;
        sy += a * a;
        sh += b * b;
    }
    if sy == 0.0 || sh == 0.0 {
        return None;
    }
    Some(num / (sy.sqrt() * sh.sqrt()))
}

/// Two nested loops: mean over expressions, then over videos; a missing
/// value counts as zero.
pub fn m_rho_oracle(rhos: &[Vec<Option<f64>>]) -> f64 {
    let mut outer = 0.0;
    for video in rhos {
        let mut inner = 0.0;
        for v in video.iter().flatten() {
            inner += v;
        }
        outer += inner / video.len() as f64;
    }
    outer / rhos.len() as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Naive dilated causal conv from the raw weight-normalized parameters.
pub fn conv_oracle(
    x: &Matrix<f64>,
    direction: &[f64],
    gains: &[f64],
    bias: &[f64],
    out_channels: usize,
    kernel: usize,
    dilation: usize,
) -> Matrix<f64> {
    let cin = x.cols();
    let mut y = Matrix::zeros(x.rows(), out_channels);
    for o in 0..out_channels {
        let mut norm_sq = 0.0;
        for c in 0..cin {
            for i in 0..kernel {
                norm_sq += direction[(o * cin + c) * kernel + i].powi(2);
            }
        }
        let scale = gains[o] / norm_sq.sqrt();
        for s in 0..x.rows() {
            let mut acc = bias[o];
            for c in 0..cin {
                for i in 0..kernel {
                    if s >= dilation * i {
                        acc += scale * direction[(o * cin + c) * kernel + i] * x.get(s - dilation * i, c);
                    }
                }
            }
            y.set(s, o, acc);
        }
    }
    y
}

/// Loss of one sequence with the given parameters; `rng` is replayed so any
/// dropout masks are the same on every call.
pub fn frozen_loss(
    model: &TcnModel<f64>,
    params: &ParameterStore<f64>,
    x: &Matrix<f64>,
    target: &Matrix<f64>,
    rng: &RngState,
) -> evtcn::Result<f64> {
    let probe = model.with_params(params.clone())?;
    let pred = probe.forward(x, true, &mut rng.clone())?;
    Ok(mse_loss(&pred, target)?.0)
}

/// Backprop gradients for the same frozen loss.
pub fn backprop_grads(
    model: &TcnModel<f64>,
    x: &Matrix<f64>,
    target: &Matrix<f64>,
    rng: &RngState,
) -> evtcn::Result<ParameterStore<f64>> {
    let mut m = model.clone();
    m.params_mut().zero_grads();
    let trace = m.forward_traced(x, true, &mut rng.clone())?;
    let (_, g) = mse_loss(trace.output(), target)?;
    m.backward(&trace, &g)?;
    Ok(m.into_params())
}

/// The joint-batch reference for one optimizer step: every video is
/// right-padded with zero rows to the longest length, run as one padded
/// tensor, and the loss gradient on padded rows is masked out. Returns the
/// stepped model and the batch loss.
pub fn joint_padded_step(model: &TcnModel<f64>, videos: &[(Matrix<f64>, Matrix<f64>)], lr: f64) -> (TcnModel<f64>, f64) {
    let longest = videos.iter().map(|(x, _)| x.rows()).max().unwrap();
    let mut m = model.clone();
    m.params_mut().zero_grads();
    let mut loss = 0.0;
    for (x, y) in videos {
        let (t, c) = (y.rows(), y.cols());
        let mut padded = Matrix::zeros(longest, x.cols());
        for s in 0..t {
            padded.row_mut(s).copy_from_slice(x.row(s));
        }
        let trace = m.forward_traced(&padded, false, &mut RngState::new(0)).unwrap();
        let mut grad = Matrix::zeros(longest, c);
        let norm = (t * c) as f64;
        for s in 0..t {
            for j in 0..c {
                let diff = trace.output().get(s, j) - y.get(s, j);
                loss += diff * diff / norm;
                grad.set(s, j, 2.0 * diff / norm);
            }
        }
        m.backward(&trace, &grad).unwrap();
    }
    sgd_step(m.params_mut(), lr).unwrap();
    (m, loss)
}

pub const OVERFIT_SEED: u64 = 7;

/// Eight seeded synthetic videos of about 120 frames, 8 features, 3 expressions.
pub fn overfit_dataset(gap_prob: f64, positional: &PositionalEncodingConfig) -> Dataset {
    let raw = generate_synthetic(&SynthConfig {
        seed: OVERFIT_SEED,
        n_videos: 8,
        min_len: 110,
        max_len: 130,
        feature_dim: 8,
        label_dim: 3,
        gap_prob,
        split: Split::Train,
    })
    .unwrap();
    raw.map(|s| concat_positional(&drop_unannotated(s), positional)).unwrap()
}

/// The small model used for the overfit check.
pub fn overfit_model_config(positional: PositionalEncodingConfig) -> TcnConfig {
    TcnConfig {
        hidden_channels: 16,
        head_hidden: 16,
        dropout_rate: 0.0,
        ..TcnConfig::new(8, 3, positional).with_blocks(3)
    }
}

pub fn overfit_train_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 0.1,
        batch_size: 1,
        seed: 1,
        ..Default::default()
    }
}

pub struct OverfitRun {
    pub m_rho: f64,
    pub epoch_losses: Vec<f64>,
    pub elapsed: Duration,
}

pub fn overfit_run(gap_prob: f64, positional: PositionalEncodingConfig, epochs: usize) -> OverfitRun {
    let start = Instant::now();
    let data = overfit_dataset(gap_prob, &positional);
    let model = TcnModel::<f32>::initialized(overfit_model_config(positional), 1).unwrap();
    let (model, log) = train(model, &data, &overfit_train_config(epochs)).unwrap();
    let preds = evtcn::training::predict_dataset(&model, &data).unwrap();
    let report = evaluate(&data, &preds).unwrap();
    OverfitRun {
        m_rho: report.m_rho,
        epoch_losses: log.epochs.iter().map(|r| r.mean_loss).collect(),
        elapsed: start.elapsed(),
    }
}

pub fn labeled_sequence(id: &str, x: Matrix<f64>, y: Matrix<f64>) -> FeatureSequence {
    let t = x.rows();
    FeatureSequence::new(id, (0..t as u64).collect(), x, Some(y), vec![true; t]).unwrap()
}

fn f32_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f32, hi: f32) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.gen_range(lo..=hi) as f64).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// A random sequence whose values are all representable in the file format.
pub fn random_sequence(rng: &mut impl Rng, id: &str) -> FeatureSequence {
    let t = rng.gen_range(0..24);
    let d = rng.gen_range(0..6);
    let mut ts = Vec::with_capacity(t);
    let mut next = rng.gen_range(0..1000u64);
    for _ in 0..t {
        ts.push(next);
        next += rng.gen_range(1..5);
    }
    let features = f32_matrix(rng, t, d, -1e6, 1e6);
    let labels = rng.gen_bool(0.7).then(|| {
        let c = rng.gen_range(1..16);
        f32_matrix(rng, t, c, 0.0, 1.0)
    });
    let mask = (0..t).map(|_| rng.gen_bool(0.8)).collect();
    FeatureSequence::new(id, ts, features, labels, mask).unwrap()
}

/// A random architecture with randomly initialized weights.
pub fn random_model_config(rng: &mut impl Rng) -> TcnConfig {
    let positional = if rng.gen_bool(0.5) {
        PositionalEncodingConfig {
            dim: 2 * rng.gen_range(1..5),
            base: rng.gen_range(10.0..20000.0),
            enabled: true,
        }
    } else {
        PositionalEncodingConfig::disabled()
    };
    let blocks = rng.gen_range(0..4);
    TcnConfig {
        hidden_channels: rng.gen_range(1..7),
        kernel_size: rng.gen_range(1..4),
        dropout_rate: rng.gen_range(0.0..0.5),
        head_hidden: rng.gen_range(1..6),
        ..TcnConfig::new(rng.gen_range(1..5), rng.gen_range(1..4), positional).with_blocks(blocks)
    }
}
