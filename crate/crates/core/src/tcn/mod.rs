//! Residual TCN blocks stacked into the temporal module, followed by the
//! two-layer regression head.

mod checkpoint;
mod config;
mod model;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_any, save_checkpoint, AnyTcnModel,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{exponential_dilations, receptive_field, TcnConfig};
pub use model::{block_forward, model_forward, BlockParams, BlockTrace, ForwardTrace, HeadParams, TcnModel};
