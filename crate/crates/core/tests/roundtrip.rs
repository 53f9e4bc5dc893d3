mod common;

use common::*;
use evtcn::metrics::PredictionMatrix;
use evtcn::seqdata::{
    decode_feature_sequence, encode_feature_sequence, load_feature_file, load_prediction_file, save_feature_file,
};
use evtcn::tcn::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_any, save_checkpoint, AnyTcnModel};
use evtcn::{Error, Matrix, TcnModel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn feature_files_round_trip(seed in any::<u64>()) {
        let seq = random_sequence(&mut rng(seed), "clip");
        let bytes = encode_feature_sequence(&seq);
        let back = decode_feature_sequence(&bytes, "clip", true).unwrap();
        prop_assert_eq!(&back, &seq);
        prop_assert_eq!(encode_feature_sequence(&back), bytes);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_model_config(&mut r);
        let wide = TcnModel::<f64>::initialized(cfg.clone(), seed).unwrap();
        prop_assert_eq!(cfg.num_parameters(), Some(wide.params().num_scalars()));
        let bytes = encode_checkpoint(&wide);
        prop_assert_eq!(decode_checkpoint(&bytes).unwrap(), AnyTcnModel::Wide(wide.clone()));
        let standard = wide.cast::<f32>();
        prop_assert_eq!(decode_checkpoint(&encode_checkpoint(&standard)).unwrap(), AnyTcnModel::Standard(standard));
    }

    #[test]
    fn corrupted_bytes_never_panic(seed in any::<u64>(), flips in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6)) {
        let mut r = rng(seed);
        let mut seq_bytes = encode_feature_sequence(&random_sequence(&mut r, "v"));
        let mut ckpt_bytes = encode_checkpoint(&TcnModel::<f32>::initialized(random_model_config(&mut r), seed).unwrap());
        for (i, v) in &flips {
            let n = seq_bytes.len();
            seq_bytes[i.index(n)] = *v;
            let n = ckpt_bytes.len();
            ckpt_bytes[i.index(n)] = *v;
        }
        // Any outcome is fine as long as it is a value or a typed error.
        let _ = decode_feature_sequence(&seq_bytes, "v", true);
        let _ = decode_checkpoint(&ckpt_bytes);
    }
}

#[test]
fn files_on_disk_round_trip_and_take_their_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(40);
    for i in 0..10 {
        let seq = random_sequence(&mut r, &format!("video_{i}"));
        let path = dir.path().join(format!("video_{i}.fseq"));
        save_feature_file(&seq, &path).unwrap();
        assert_eq!(load_feature_file(&path).unwrap(), seq);
    }
}

#[test]
fn prediction_files_carry_unbounded_values() {
    let dir = tempfile::tempdir().unwrap();
    let pred = PredictionMatrix {
        video_id: "p".into(),
        values: Matrix::from_vec(3, 2, vec![-0.25, 1.5, 0.5, 0.0, 2.0, -1.0]).unwrap(),
        timestamp_indices: vec![2, 5, 9],
    };
    let path = dir.path().join("p.fseq");
    save_feature_file(&pred.to_sequence().unwrap(), &path).unwrap();
    let back = PredictionMatrix::from_sequence(&load_prediction_file(&path).unwrap()).unwrap();
    assert_eq!(back, pred);
    // The labeled-data loader still enforces [0, 1].
    assert!(matches!(load_feature_file(&path).unwrap_err().root(), Error::Validation(_)));
}

#[test]
fn checkpoint_files_round_trip_and_cast() {
    let dir = tempfile::tempdir().unwrap();
    let model = TcnModel::<f32>::initialized(small_config(3, 4, 2, 3, 2), 8).unwrap();
    let path = dir.path().join("m.tcnk");
    save_checkpoint(&model, &path).unwrap();
    assert_eq!(load_checkpoint::<f32>(&path).unwrap(), model);
    assert_eq!(load_checkpoint_any(&path).unwrap(), AnyTcnModel::Standard(model.clone()));
    // Widening f32 weights is exact.
    assert_eq!(load_checkpoint::<f64>(&path).unwrap(), model.cast::<f64>());
}

#[test]
fn every_truncation_is_a_typed_error() {
    let mut r = rng(41);
    let seq = random_sequence(&mut r, "v");
    let bytes = encode_feature_sequence(&seq);
    for cut in 0..bytes.len() {
        let err = decode_feature_sequence(&bytes[..cut], "v", true).unwrap_err();
        assert!(matches!(err, Error::Corrupt(_) | Error::Format(_)), "cut {cut}: {err}");
    }
    let ckpt = encode_checkpoint(&TcnModel::<f64>::initialized(small_config(2, 3, 1, 2, 1), 1).unwrap());
    for cut in 0..ckpt.len() {
        let err = decode_checkpoint(&ckpt[..cut]).unwrap_err();
        assert!(matches!(err, Error::Corrupt(_) | Error::Format(_)), "cut {cut}: {err}");
    }
}

#[test]
fn missing_file_is_an_io_error_with_its_path() {
    let err = load_feature_file("/nonexistent/dir/x.fseq").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/dir/x.fseq"), "{err}");
}
