//! Python bindings: `import evtcn`.

use std::path::PathBuf;

use evtcn_core as ev;
use ev::nncore::RngState;
use ev::seqdata::{concat_positional, drop_unannotated, generate_synthetic, load_feature_file, save_feature_file, SynthConfig};
use ev::tcn::{load_checkpoint_any, save_checkpoint, AnyTcnModel};
use ev::{FeatureSequence, Matrix, PositionalEncodingConfig, Precision, Scalar, Split, TcnConfig, TcnModel, TrainConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(evtcn, EvtcnError, PyException, "Base class for every evtcn error.");
create_exception!(evtcn, FormatError, EvtcnError, "Malformed or truncated file.");
create_exception!(evtcn, ConfigError, EvtcnError, "Invalid setting.");
create_exception!(evtcn, DivergenceError, EvtcnError, "Training produced a non-finite loss or gradient.");

fn to_py(e: ev::Error) -> PyErr {
    let msg = e.to_string();
    match e.root() {
        ev::Error::Format(_) | ev::Error::Corrupt(_) => FormatError::new_err(msg),
        ev::Error::Config(_) => ConfigError::new_err(msg),
        ev::Error::Divergence(_) => DivergenceError::new_err(msg),
        _ => EvtcnError::new_err(msg),
    }
}

fn matrix(rows: Vec<Vec<f64>>, width: Option<usize>) -> PyResult<Matrix<f64>> {
    let cols = width.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    Matrix::from_rows(&rows, cols).map_err(to_py)
}

fn positional(enabled: bool, dim: usize, base: f64) -> PositionalEncodingConfig {
    PositionalEncodingConfig { dim, base, enabled }
}

/// One video: timestamps, per-frame features, optional labels and annotation mask.
#[pyclass(name = "Sequence", module = "evtcn", from_py_object)]
#[derive(Clone)]
pub struct PySequence {
    inner: FeatureSequence,
}

#[pymethods]
impl PySequence {
    #[new]
    #[pyo3(signature = (video_id, timestamps, features, labels=None, mask=None))]
    fn new(
        video_id: String,
        timestamps: Vec<u64>,
        features: Vec<Vec<f64>>,
        labels: Option<Vec<Vec<f64>>>,
        mask: Option<Vec<bool>>,
    ) -> PyResult<Self> {
        let t = timestamps.len();
        let features = matrix(features, (t == 0).then_some(0))?;
        let labels = labels.map(|l| matrix(l, None)).transpose()?;
        let mask = mask.unwrap_or_else(|| vec![true; t]);
        FeatureSequence::new(video_id, timestamps, features, labels, mask)
            .map(|inner| PySequence { inner })
            .map_err(to_py)
    }

    /// Reads an FSEQ1 file; the video id is the file stem.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_feature_file(path).map(|inner| PySequence { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_feature_file(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn video_id(&self) -> String {
        self.inner.video_id().to_string()
    }

    #[getter]
    fn timestamps(&self) -> Vec<u64> {
        self.inner.timestamp_indices().to_vec()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.features().to_rows()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.labels().map(Matrix::to_rows)
    }

    #[getter]
    fn mask(&self) -> Vec<bool> {
        self.inner.annotated_mask().to_vec()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn drop_unannotated(&self) -> Self {
        PySequence {
            inner: drop_unannotated(&self.inner),
        }
    }

    #[pyo3(signature = (dim=16, base=10000.0))]
    fn with_positional(&self, dim: usize, base: f64) -> PyResult<Self> {
        concat_positional(&self.inner, &positional(true, dim, base))
            .map(|inner| PySequence { inner })
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Sequence(video_id={:?}, frames={}, features={}, labels={:?})",
            self.inner.video_id(),
            self.inner.len(),
            self.inner.feature_dim(),
            self.inner.label_dim()
        )
    }
}

fn prepare(seqs: &[PySequence], pe: &PositionalEncodingConfig) -> PyResult<ev::Dataset> {
    let raw = ev::Dataset::new(seqs.iter().map(|s| s.inner.clone()).collect(), Split::Train).map_err(to_py)?;
    raw.map(|s| concat_positional(&drop_unannotated(s), pe)).map_err(to_py)
}

fn forward<S: Scalar>(m: &TcnModel<S>, x: &Matrix<f64>) -> ev::Result<Vec<Vec<f64>>> {
    m.forward(&x.cast(), false, &mut RngState::new(0)).map(|y| y.cast::<f64>().to_rows())
}

fn fit<S: Scalar>(m: &TcnModel<S>, data: &ev::Dataset, cfg: &TrainConfig) -> ev::Result<(TcnModel<S>, Vec<f64>)> {
    let (model, log) = ev::train(m.clone(), data, cfg)?;
    Ok((model, log.epochs.iter().map(|r| r.mean_loss).collect()))
}

/// A TCN regressor. `features` is the raw per-frame width; positional columns
/// are added on top when enabled. Sequences passed to `train` and
/// `predict_sequence` are cleaned of unannotated frames and encoded first.
#[pyclass(name = "Model", module = "evtcn")]
pub struct PyModel {
    inner: AnyTcnModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (
        features, outputs, *, hidden=64, blocks=4, kernel_size=3, head_hidden=64, dropout=0.2,
        positional_encoding=true, pe_dim=16, pe_base=10000.0, seed=0, precision="standard"
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        features: usize,
        outputs: usize,
        hidden: usize,
        blocks: usize,
        kernel_size: usize,
        head_hidden: usize,
        dropout: f64,
        positional_encoding: bool,
        pe_dim: usize,
        pe_base: f64,
        seed: u64,
        precision: &str,
    ) -> PyResult<Self> {
        let cfg = TcnConfig {
            hidden_channels: hidden,
            kernel_size,
            head_hidden,
            dropout_rate: dropout,
            ..TcnConfig::new(features, outputs, positional(positional_encoding, pe_dim, pe_base)).with_blocks(blocks)
        };
        let precision: Precision = precision.parse().map_err(to_py)?;
        let inner = match precision {
            Precision::Standard => AnyTcnModel::Standard(TcnModel::initialized(cfg, seed).map_err(to_py)?),
            Precision::Wide => AnyTcnModel::Wide(TcnModel::initialized(cfg, seed).map_err(to_py)?),
        };
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_checkpoint_any(path).map(|inner| PyModel { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        match &self.inner {
            AnyTcnModel::Standard(m) => save_checkpoint(m, path),
            AnyTcnModel::Wide(m) => save_checkpoint(m, path),
        }
        .map_err(to_py)
    }

    /// Inference on a ready `T × input_dim` matrix (positional columns included).
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(features, None)?;
        match &self.inner {
            AnyTcnModel::Standard(m) => forward(m, &x),
            AnyTcnModel::Wide(m) => forward(m, &x),
        }
        .map_err(to_py)
    }

    /// Drops unannotated frames, adds positional columns, and predicts.
    fn predict_sequence(&self, seq: &PySequence) -> PyResult<Vec<Vec<f64>>> {
        let prepared = prepare(std::slice::from_ref(seq), &self.inner.config().positional)?;
        self.predict(prepared.sequences()[0].features().to_rows())
    }

    /// Trains in place and returns the mean loss of every epoch.
    #[pyo3(signature = (sequences, epochs=20, lr=5e-3, batch_size=32, seed=0))]
    fn train(
        &mut self,
        py: Python<'_>,
        sequences: Vec<PySequence>,
        epochs: usize,
        lr: f64,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let data = prepare(&sequences, &self.inner.config().positional)?;
        let cfg = TrainConfig {
            epochs,
            learning_rate: lr,
            batch_size,
            accumulation: true,
            seed,
            precision: self.precision_enum(),
        };
        let current = &self.inner;
        let (model, losses) = py
            .detach(|| match current {
                AnyTcnModel::Standard(m) => fit(m, &data, &cfg).map(|(m, l)| (AnyTcnModel::Standard(m), l)),
                AnyTcnModel::Wide(m) => fit(m, &data, &cfg).map(|(m, l)| (AnyTcnModel::Wide(m), l)),
            })
            .map_err(to_py)?;
        self.inner = model;
        Ok(losses)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.config().input_dim
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.config().output_dim
    }

    #[getter]
    fn receptive_field(&self) -> usize {
        ev::receptive_field(self.inner.config())
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        match &self.inner {
            AnyTcnModel::Standard(m) => m.params().num_scalars(),
            AnyTcnModel::Wide(m) => m.params().num_scalars(),
        }
    }

    #[getter]
    fn precision(&self) -> String {
        self.precision_enum().to_string()
    }

    fn __repr__(&self) -> String {
        let c = self.inner.config();
        format!(
            "Model(input_dim={}, outputs={}, hidden={}, blocks={}, kernel_size={}, precision={})",
            c.input_dim,
            c.output_dim,
            c.hidden_channels,
            c.num_blocks,
            c.kernel_size,
            self.precision_enum()
        )
    }
}

impl PyModel {
    fn precision_enum(&self) -> Precision {
        match self.inner {
            AnyTcnModel::Standard(_) => Precision::Standard,
            AnyTcnModel::Wide(_) => Precision::Wide,
        }
    }
}

/// Sinusoidal encoding of an integer timestamp.
#[pyfunction]
#[pyo3(signature = (t, dim=16, base=10000.0))]
fn positional_encode(t: u64, dim: usize, base: f64) -> PyResult<Vec<f64>> {
    ev::seqdata::positional_encode(t, &positional(true, dim, base)).map_err(to_py)
}

/// Pearson correlation, or `None` when either input is constant.
#[pyfunction]
fn pearson_rho(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<Option<f64>> {
    ev::pearson_rho(&y, &yhat).map_err(to_py)
}

/// Mean over videos of the mean over expressions; `None` entries count as 0.
/// Returns `(m_rho, undefined_count)`.
#[pyfunction]
fn m_rho(per_video: Vec<Vec<Option<f64>>>) -> PyResult<(f64, usize)> {
    ev::m_rho(&per_video).map_err(to_py)
}

/// `lam * a + (1 - lam) * b` for two `T × C` prediction matrices.
#[pyfunction]
#[pyo3(signature = (a, b, lam=0.8))]
fn ensemble(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, lam: f64) -> PyResult<Vec<Vec<f64>>> {
    let wrap = |rows: Vec<Vec<f64>>| -> PyResult<ev::PredictionMatrix> {
        let values = matrix(rows, None)?;
        Ok(ev::PredictionMatrix {
            video_id: String::new(),
            timestamp_indices: (0..values.rows() as u64).collect(),
            values,
        })
    };
    let out = ev::ensemble(&[wrap(a)?], &[wrap(b)?], lam).map_err(to_py)?;
    Ok(out[0].values.to_rows())
}

/// Steps of history visible to one output for the given kernel and per-block dilations.
#[pyfunction]
fn receptive_field(kernel_size: usize, dilations: Vec<usize>) -> usize {
    let cfg = TcnConfig {
        kernel_size,
        num_blocks: dilations.len(),
        dilation_schedule: dilations,
        ..TcnConfig::new(1, 1, PositionalEncodingConfig::disabled())
    };
    ev::receptive_field(&cfg)
}

#[pyfunction]
#[pyo3(signature = (seed=0, videos=8, min_len=100, max_len=140, features=8, expressions=15, gap_prob=0.0))]
fn synthetic_dataset(
    seed: u64,
    videos: usize,
    min_len: usize,
    max_len: usize,
    features: usize,
    expressions: usize,
    gap_prob: f64,
) -> PyResult<Vec<PySequence>> {
    let cfg = SynthConfig {
        seed,
        n_videos: videos,
        min_len,
        max_len,
        feature_dim: features,
        label_dim: expressions,
        gap_prob,
        split: Split::Train,
    };
    let data = generate_synthetic(&cfg).map_err(to_py)?;
    Ok(data.into_sequences().into_iter().map(|inner| PySequence { inner }).collect())
}

/// Scores `model` on labeled sequences. Returns `(m_rho, undefined_count)`.
#[pyfunction]
fn evaluate(model: &PyModel, sequences: Vec<PySequence>) -> PyResult<(f64, usize)> {
    let data = prepare(&sequences, &model.inner.config().positional)?;
    let preds = match &model.inner {
        AnyTcnModel::Standard(m) => ev::training::predict_dataset(m, &data),
        AnyTcnModel::Wide(m) => ev::training::predict_dataset(m, &data),
    }
    .map_err(to_py)?;
    let report = ev::evaluate(&data, &preds).map_err(to_py)?;
    Ok((report.m_rho, report.undefined_count))
}

#[pymodule]
#[pyo3(name = "evtcn")]
fn evtcn_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PySequence>()?;
    m.add_class::<PyModel>()?;
    for f in [
        wrap_pyfunction!(positional_encode, m)?,
        wrap_pyfunction!(pearson_rho, m)?,
        wrap_pyfunction!(m_rho, m)?,
        wrap_pyfunction!(ensemble, m)?,
        wrap_pyfunction!(receptive_field, m)?,
        wrap_pyfunction!(synthetic_dataset, m)?,
        wrap_pyfunction!(evaluate, m)?,
    ] {
        m.add_function(f)?;
    }
    m.add("EvtcnError", py.get_type::<EvtcnError>())?;
    m.add("FormatError", py.get_type::<FormatError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DivergenceError", py.get_type::<DivergenceError>())?;
    Ok(())
}

/// Registers the module with an embedded interpreter (used by the Rust tests).
pub fn register_embedded() {
    pyo3::append_to_inittab!(evtcn_module);
}
