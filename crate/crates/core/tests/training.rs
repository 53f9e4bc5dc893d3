mod common;

use common::*;
use evtcn::nncore::{ParamRole, ParameterStore};
use evtcn::training::{batch_loss, mse_loss, sgd_step};
use evtcn::{train, Dataset, Error, Matrix, PositionalEncodingConfig, Precision, Split, TcnModel, TrainConfig};
use rand::Rng;

fn toy_dataset(seed: u64, lengths: &[usize], input_dim: usize, out: usize) -> Dataset {
    let mut r = rng(seed);
    let seqs = lengths
        .iter()
        .enumerate()
        .map(|(v, &t)| {
            let x = random_matrix(&mut r, t, input_dim);
            let y = Matrix::from_vec(t, out, (0..t * out).map(|_| r.gen_range(0.0..1.0)).collect()).unwrap();
            labeled_sequence(&format!("v{v}"), x, y)
        })
        .collect();
    Dataset::new(seqs, Split::Train).unwrap()
}

#[test]
fn mse_matches_entry_loop() {
    let mut r = rng(50);
    let pred = random_matrix(&mut r, 3, 2);
    let target = random_matrix(&mut r, 3, 2);
    let (loss, grad) = mse_loss(&pred, &target).unwrap();
    let mut want = 0.0;
    for s in 0..3 {
        for c in 0..2 {
            let d = pred.get(s, c) - target.get(s, c);
            want += d * d / 6.0;
            assert!((grad.get(s, c) - 2.0 * d / 6.0).abs() <= 1e-15);
        }
    }
    assert!(rel_err(loss, want) <= 1e-12);
}

#[test]
fn batch_loss_is_additive_and_length_normalized() {
    let one = (Matrix::from_vec(1, 1, vec![0.3]).unwrap(), Matrix::from_vec(1, 1, vec![0.1]).unwrap());
    let long = (Matrix::from_vec(1000, 1, vec![0.3; 1000]).unwrap(), Matrix::from_vec(1000, 1, vec![0.1; 1000]).unwrap());
    let single = batch_loss(std::slice::from_ref(&one)).unwrap();
    assert_eq!(single, mse_loss(&one.0, &one.1).unwrap().0);
    assert_eq!(batch_loss(&[one.clone(), one.clone()]).unwrap(), 2.0 * single);
    let long_loss = mse_loss(&long.0, &long.1).unwrap().0;
    assert!(rel_err(long_loss, single) <= 1e-12, "{long_loss} vs {single}");
}

#[test]
fn sgd_contracts_a_quadratic_bowl() {
    let mut s = ParameterStore::<f64>::new();
    let id = s.register("theta", &[1], ParamRole::Bias).unwrap();
    s.value_mut(id)[0] = 1.0;
    for _ in 0..50 {
        let theta = s.value(id)[0];
        s.accumulate_grad(id, &[2.0 * theta]);
        sgd_step(&mut s, 0.1).unwrap();
    }
    let theta = s.value(id)[0];
    assert!(theta.abs() < 1e-4);
    assert!(rel_err(theta, 0.8f64.powi(50)) <= 1e-12);
}

#[test]
fn non_finite_gradient_is_divergence_naming_the_parameter() {
    let mut s = ParameterStore::<f32>::new();
    s.register("ok", &[2], ParamRole::Bias).unwrap();
    let bad = s.register("bad", &[1], ParamRole::Bias).unwrap();
    s.accumulate_grad(bad, &[f32::NAN]);
    let values = |s: &ParameterStore<f32>| -> Vec<f32> { s.iter().flat_map(|p| p.value.clone()).collect() };
    let before = values(&s);
    let err = sgd_step(&mut s, 0.1).unwrap_err();
    assert!(matches!(&err, Error::Divergence(m) if m.contains("bad")), "{err}");
    assert_eq!(values(&s), before);
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let data = toy_dataset(51, &[6, 9], 3, 2);
    let model = TcnModel::<f32>::initialized(small_config(3, 4, 2, 3, 2), 3).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        learning_rate: 0.0,
        ..Default::default()
    };
    let (trained, log) = train(model.clone(), &data, &cfg).unwrap();
    let bits = |m: &TcnModel<f32>| -> Vec<u32> { m.params().iter().flat_map(|p| p.value.iter().map(|v| v.to_bits())).collect() };
    assert_eq!(bits(&trained), bits(&model));
    assert_eq!(log.epochs.len(), 1);
}

#[test]
fn same_seed_same_model() {
    let data = toy_dataset(52, &[5, 8, 11], 2, 1);
    let mut cfg_model = small_config(2, 4, 2, 2, 1);
    cfg_model.dropout_rate = 0.3;
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 0.05,
        batch_size: 2,
        seed: 17,
        precision: Precision::Standard,
        ..Default::default()
    };
    let run = || train(TcnModel::<f32>::initialized(cfg_model.clone(), 17).unwrap(), &data, &cfg).unwrap().0;
    assert_eq!(run(), run());
    let other = train(
        TcnModel::<f32>::initialized(cfg_model.clone(), 17).unwrap(),
        &data,
        &TrainConfig { seed: 18, ..cfg.clone() },
    )
    .unwrap()
    .0;
    assert_ne!(run(), other);
}

#[test]
fn per_video_steps_without_accumulation() {
    let data = toy_dataset(53, &[4, 4, 4], 2, 1);
    let model = TcnModel::<f64>::initialized(small_config(2, 3, 1, 2, 1), 2).unwrap();
    let base = TrainConfig {
        epochs: 1,
        learning_rate: 0.1,
        batch_size: 3,
        precision: Precision::Wide,
        ..Default::default()
    };
    let one_at_a_time = train(model.clone(), &data, &TrainConfig { batch_size: 1, ..base.clone() }).unwrap().0;
    let no_accum = train(model.clone(), &data, &TrainConfig { accumulation: false, ..base.clone() }).unwrap().0;
    let accumulated = train(model, &data, &base).unwrap().0;
    assert_eq!(one_at_a_time, no_accum);
    assert_ne!(accumulated, no_accum);
}

#[test]
fn dimension_mismatch_names_the_video() {
    let data = toy_dataset(54, &[5, 5], 3, 2);
    let model = TcnModel::<f32>::initialized(small_config(4, 3, 1, 2, 2), 1).unwrap();
    let err = train(model, &data, &TrainConfig::default()).unwrap_err();
    assert!(matches!(&err, Error::Shape(m) if m.contains("v")), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    let data = toy_dataset(55, &[3], 1, 1);
    let model = TcnModel::<f32>::initialized(small_config(1, 2, 1, 2, 1), 1).unwrap();
    for cfg in [
        TrainConfig { epochs: 0, ..Default::default() },
        TrainConfig { batch_size: 0, ..Default::default() },
        TrainConfig { learning_rate: -1.0, ..Default::default() },
        TrainConfig { learning_rate: f64::NAN, ..Default::default() },
    ] {
        assert!(matches!(train(model.clone(), &data, &cfg), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn loss_falls_over_twenty_epochs_on_the_synthetic_task() {
    let run = overfit_run(0.0, PositionalEncodingConfig::default(), 20);
    assert_eq!(run.epoch_losses.len(), 20);
    assert!(run.epoch_losses[19] < run.epoch_losses[0], "{:?}", run.epoch_losses);
}

#[test]
fn exploding_learning_rate_reports_divergence() {
    let data = toy_dataset(56, &[20, 20], 2, 1);
    let model = TcnModel::<f32>::initialized(small_config(2, 8, 2, 3, 1), 4).unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        learning_rate: 1e30,
        batch_size: 1,
        ..Default::default()
    };
    let err = train(model, &data, &cfg).unwrap_err();
    assert!(matches!(err, Error::Divergence(_)), "{err}");
}
