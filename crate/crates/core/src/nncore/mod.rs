//! Numeric kernels with explicit forward and backward passes.

mod activation;
mod conv;
mod gradcheck;
mod linear;
mod params;
mod rng;

pub use activation::{dropout_backward, dropout_forward, relu_backward, relu_forward};
pub use conv::{
    dilated_causal_conv_backward, dilated_causal_conv_forward, effective_weights,
    weight_norm_effective, ConvGrads, ConvShape, ConvView, DilatedConvParams,
};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error, GradComparison};
pub use linear::{linear_backward, linear_forward, LinearGrads, LinearParams, LinearView};
pub use params::{init_parameters, ParamId, ParamRole, Parameter, ParameterStore};
pub use rng::RngState;
