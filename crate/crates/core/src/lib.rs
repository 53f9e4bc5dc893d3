//! Temporal convolution networks over per-frame feature sequences with gaps.
//!
//! The pipeline: drop unannotated frames ([`seqdata::drop_unannotated`]),
//! concatenate a sinusoidal encoding of each surviving frame's original index
//! ([`seqdata::concat_positional`]), run a stack of weight-normalized dilated
//! causal residual blocks plus a two-layer regression head ([`tcn::TcnModel`]),
//! train with length-normalized MSE and SGD over accumulated gradients
//! ([`training`]), and score with per-video Pearson correlation averaged over
//! expressions and videos ([`metrics`]).

mod bytes;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod nncore;
pub mod seqdata;
pub mod tcn;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use metrics::{ensemble, evaluate, m_rho, pearson_rho, EvaluationReport, PredictionMatrix};
pub use seqdata::{Dataset, FeatureSequence, PositionalEncodingConfig, Split};
pub use tcn::{receptive_field, TcnConfig, TcnModel};
pub use tensor::{Matrix, Scalar};
pub use training::{train, Precision, TrainConfig, TrainLog};
