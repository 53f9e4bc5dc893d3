use super::TcnConfig;
use crate::error::{Error, Result};
use crate::nncore::{
    dilated_causal_conv_backward, dilated_causal_conv_forward, dropout_backward, dropout_forward,
    init_parameters, linear_backward, linear_forward, relu_backward, relu_forward, ConvShape, ConvView,
    LinearView, ParamId, ParamRole, ParameterStore, RngState,
};
use crate::seqdata::FeatureSequence;
use crate::tensor::{Matrix, Scalar};

/// Stream reserved for initialization so it never coincides with the
/// training streams of the same seed.
const INIT_STREAM: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq)]
struct ConvSlot {
    shape: ConvShape,
    direction: ParamId,
    gain: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
struct LinearSlot {
    in_features: usize,
    out_features: usize,
    weight: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
struct BlockSlots {
    conv1: ConvSlot,
    conv2: ConvSlot,
    /// Plain 1×1 conv, present iff the block changes the channel count.
    downsample: Option<LinearSlot>,
}

/// Borrowed parameters of one residual block.
#[derive(Clone, Copy, Debug)]
pub struct BlockParams<'a, S> {
    pub conv1: ConvView<'a, S>,
    pub conv2: ConvView<'a, S>,
    pub downsample: Option<LinearView<'a, S>>,
    pub dropout_rate: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct HeadParams<'a, S> {
    pub fc1: LinearView<'a, S>,
    pub fc2: LinearView<'a, S>,
}

/// Activations a block keeps for its backward pass.
#[derive(Clone, Debug)]
pub struct BlockTrace<S> {
    input: Matrix<S>,
    pre1: Matrix<S>,
    mask1: Option<Matrix<S>>,
    hidden1: Matrix<S>,
    pre2: Matrix<S>,
    mask2: Option<Matrix<S>>,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace<S> {
    blocks: Vec<BlockTrace<S>>,
    head_input: Matrix<S>,
    head_pre: Matrix<S>,
    head_hidden: Matrix<S>,
    output: Matrix<S>,
}

impl<S> ForwardTrace<S> {
    pub fn output(&self) -> &Matrix<S> {
        &self.output
    }
}

/// `DropReLU(Conv2(DropReLU(Conv1(x)))) + P(x)`, where `P` is the identity or a 1×1 conv.
pub fn block_forward<S: Scalar>(
    x: &Matrix<S>,
    p: &BlockParams<'_, S>,
    training: bool,
    rng: &mut RngState,
) -> Result<Matrix<S>> {
    block_forward_traced(x, p, training, rng).map(|(y, _)| y)
}

fn block_forward_traced<S: Scalar>(
    x: &Matrix<S>,
    p: &BlockParams<'_, S>,
    training: bool,
    rng: &mut RngState,
) -> Result<(Matrix<S>, BlockTrace<S>)> {
    let pre1 = dilated_causal_conv_forward(x, &p.conv1)?;
    let (hidden1, mask1) = dropout_forward(&relu_forward(&pre1), p.dropout_rate, training, rng)?;
    let pre2 = dilated_causal_conv_forward(&hidden1, &p.conv2)?;
    let (mut out, mask2) = dropout_forward(&relu_forward(&pre2), p.dropout_rate, training, rng)?;
    match &p.downsample {
        Some(proj) => out.add_assign(&linear_forward(x, proj)?),
        None if x.cols() == out.cols() => out.add_assign(x),
        None => {
            return Err(Error::Shape(format!(
                "residual needs a projection from {} to {} channels",
                x.cols(),
                out.cols()
            )))
        }
    }
    let trace = BlockTrace {
        input: x.clone(),
        pre1,
        mask1,
        hidden1,
        pre2,
        mask2,
    };
    Ok((out, trace))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcnModel<S> {
    config: TcnConfig,
    params: ParameterStore<S>,
    blocks: Vec<BlockSlots>,
    fc1: LinearSlot,
    fc2: LinearSlot,
}

impl<S: Scalar> TcnModel<S> {
    /// Registers every tensor with zero values. Use [`TcnModel::initialized`]
    /// for a usable model; zero directions are singular.
    pub fn new(config: TcnConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterStore::new();
        let k = config.kernel_size;
        let h = config.hidden_channels;

        let conv = |params: &mut ParameterStore<S>, prefix: String, cin: usize, d: usize| -> Result<ConvSlot> {
            let shape = ConvShape {
                in_channels: cin,
                out_channels: h,
                kernel_size: k,
                dilation: d,
            };
            let direction = params.register(
                format!("{prefix}.direction"),
                &[h, cin, k],
                ParamRole::Direction { fan_in: cin * k },
            )?;
            let gain = params.register(format!("{prefix}.gain"), &[h], ParamRole::Gain { direction })?;
            let bias = params.register(format!("{prefix}.bias"), &[h], ParamRole::Bias)?;
            Ok(ConvSlot {
                shape,
                direction,
                gain,
                bias,
            })
        };
        let linear = |params: &mut ParameterStore<S>, prefix: String, cin: usize, cout: usize| -> Result<LinearSlot> {
            let weight = params.register(
                format!("{prefix}.weight"),
                &[cout, cin],
                ParamRole::Weight { fan_in: cin },
            )?;
            let bias = params.register(format!("{prefix}.bias"), &[cout], ParamRole::Bias)?;
            Ok(LinearSlot {
                in_features: cin,
                out_features: cout,
                weight,
                bias,
            })
        };

        let mut blocks = Vec::with_capacity(config.num_blocks);
        for (b, &d) in config.dilation_schedule.iter().enumerate() {
            let cin = if b == 0 { config.input_dim } else { h };
            let conv1 = conv(&mut params, format!("block{b}.conv1"), cin, d)?;
            let conv2 = conv(&mut params, format!("block{b}.conv2"), h, d)?;
            let downsample = if cin != h {
                Some(linear(&mut params, format!("block{b}.downsample"), cin, h)?)
            } else {
                None
            };
            blocks.push(BlockSlots {
                conv1,
                conv2,
                downsample,
            });
        }
        let head_in = if config.num_blocks == 0 { config.input_dim } else { h };
        let fc1 = linear(&mut params, "head.fc1".into(), head_in, config.head_hidden)?;
        let fc2 = linear(&mut params, "head.fc2".into(), config.head_hidden, config.output_dim)?;
        Ok(TcnModel {
            config,
            params,
            blocks,
            fc1,
            fc2,
        })
    }

    /// A model with parameters drawn from `seed` by [`init_parameters`].
    pub fn initialized(config: TcnConfig, seed: u64) -> Result<Self> {
        let mut model = Self::new(config)?;
        init_parameters(&mut model.params, &mut RngState::with_counter(seed, INIT_STREAM));
        Ok(model)
    }

    pub fn config(&self) -> &TcnConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterStore<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore<S> {
        &mut self.params
    }

    pub fn into_params(self) -> ParameterStore<S> {
        self.params
    }

    /// Same architecture with `params` swapped in. Names and shapes must match.
    pub fn with_params(&self, params: ParameterStore<S>) -> Result<Self> {
        let same_layout = params.len() == self.params.len()
            && params
                .iter()
                .zip(self.params.iter())
                .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if !same_layout {
            return Err(Error::Shape("parameter store layout does not match the model".into()));
        }
        Ok(TcnModel {
            params,
            ..self.clone()
        })
    }

    pub fn cast<T: Scalar>(&self) -> TcnModel<T> {
        TcnModel {
            config: self.config.clone(),
            params: self.params.cast(),
            blocks: self.blocks.clone(),
            fc1: self.fc1.clone(),
            fc2: self.fc2.clone(),
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    fn conv_view(&self, slot: &ConvSlot) -> ConvView<'_, S> {
        ConvView {
            shape: slot.shape,
            direction: self.params.value(slot.direction),
            gains: self.params.value(slot.gain),
            bias: self.params.value(slot.bias),
        }
    }

    fn linear_view(&self, slot: &LinearSlot) -> LinearView<'_, S> {
        LinearView {
            in_features: slot.in_features,
            out_features: slot.out_features,
            weights: self.params.value(slot.weight),
            bias: self.params.value(slot.bias),
        }
    }

    pub fn block_params(&self, b: usize) -> BlockParams<'_, S> {
        let slots = &self.blocks[b];
        BlockParams {
            conv1: self.conv_view(&slots.conv1),
            conv2: self.conv_view(&slots.conv2),
            downsample: slots.downsample.as_ref().map(|s| self.linear_view(s)),
            dropout_rate: self.config.dropout_rate,
        }
    }

    pub fn head_params(&self) -> HeadParams<'_, S> {
        HeadParams {
            fc1: self.linear_view(&self.fc1),
            fc2: self.linear_view(&self.fc2),
        }
    }

    fn check_input(&self, x: &Matrix<S>) -> Result<()> {
        if x.cols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "model expects {} input columns, got {}",
                self.config.input_dim,
                x.cols()
            )));
        }
        if x.is_empty() {
            return Err(Error::EmptyInput("sequence has no rows".into()));
        }
        Ok(())
    }

    /// Per-timestamp predictions, `T × output_dim`.
    pub fn forward(&self, x: &Matrix<S>, training: bool, rng: &mut RngState) -> Result<Matrix<S>> {
        self.forward_traced(x, training, rng).map(|t| t.output)
    }

    pub fn forward_traced(&self, x: &Matrix<S>, training: bool, rng: &mut RngState) -> Result<ForwardTrace<S>> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in 0..self.blocks.len() {
            let (out, trace) = block_forward_traced(&h, &self.block_params(b), training, rng)?;
            blocks.push(trace);
            h = out;
        }
        let head = self.head_params();
        let head_pre = linear_forward(&h, &head.fc1)?;
        let head_hidden = relu_forward(&head_pre);
        let output = linear_forward(&head_hidden, &head.fc2)?;
        Ok(ForwardTrace {
            blocks,
            head_input: h,
            head_pre,
            head_hidden,
            output,
        })
    }

    /// Accumulates parameter gradients for `d loss / d output = upstream` and
    /// returns the gradient with respect to the model input.
    pub fn backward(&mut self, trace: &ForwardTrace<S>, upstream: &Matrix<S>) -> Result<Matrix<S>> {
        if upstream.shape() != trace.output.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                trace.output.shape()
            )));
        }
        let (fc1, fc2) = (self.fc1.clone(), self.fc2.clone());
        let g2 = linear_backward(&trace.head_hidden, &self.linear_view(&fc2), upstream)?;
        self.params.accumulate_grad(fc2.weight, &g2.weights);
        self.params.accumulate_grad(fc2.bias, &g2.bias);
        let g_pre = relu_backward(&trace.head_pre, &g2.input);
        let g1 = linear_backward(&trace.head_input, &self.linear_view(&fc1), &g_pre)?;
        self.params.accumulate_grad(fc1.weight, &g1.weights);
        self.params.accumulate_grad(fc1.bias, &g1.bias);

        let mut grad = g1.input;
        for b in (0..self.blocks.len()).rev() {
            grad = self.block_backward(b, &trace.blocks[b], &grad)?;
        }
        Ok(grad)
    }

    fn block_backward(&mut self, b: usize, t: &BlockTrace<S>, upstream: &Matrix<S>) -> Result<Matrix<S>> {
        let slots = self.blocks[b].clone();

        let mut grad_input = match &slots.downsample {
            Some(proj) => {
                let g = linear_backward(&t.input, &self.linear_view(proj), upstream)?;
                self.params.accumulate_grad(proj.weight, &g.weights);
                self.params.accumulate_grad(proj.bias, &g.bias);
                g.input
            }
            None => upstream.clone(),
        };

        let g_act2 = dropout_backward(t.mask2.as_ref(), upstream);
        let g_pre2 = relu_backward(&t.pre2, &g_act2);
        let g = dilated_causal_conv_backward(&t.hidden1, &self.conv_view(&slots.conv2), &g_pre2)?;
        self.accumulate_conv(&slots.conv2, &g.direction, &g.gains, &g.bias);

        let g_act1 = dropout_backward(t.mask1.as_ref(), &g.input);
        let g_pre1 = relu_backward(&t.pre1, &g_act1);
        let g = dilated_causal_conv_backward(&t.input, &self.conv_view(&slots.conv1), &g_pre1)?;
        self.accumulate_conv(&slots.conv1, &g.direction, &g.gains, &g.bias);

        grad_input.add_assign(&g.input);
        Ok(grad_input)
    }

    fn accumulate_conv(&mut self, slot: &ConvSlot, direction: &[S], gains: &[S], bias: &[S]) {
        self.params.accumulate_grad(slot.direction, direction);
        self.params.accumulate_grad(slot.gain, gains);
        self.params.accumulate_grad(slot.bias, bias);
    }
}

/// Runs the model on a sequence's (already encoded) features.
pub fn model_forward<S: Scalar>(
    seq: &FeatureSequence,
    model: &TcnModel<S>,
    training: bool,
    rng: &mut RngState,
) -> Result<Matrix<S>> {
    if seq.is_empty() {
        return Err(Error::EmptyInput(format!("video `{}` has no rows", seq.video_id())));
    }
    model
        .forward(&seq.features().cast(), training, rng)
        .map_err(|e| match e {
            Error::Shape(m) => Error::Shape(format!("video `{}`: {m}", seq.video_id())),
            e => e,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::PositionalEncodingConfig;

    fn config(input_dim: usize, hidden: usize, blocks: usize) -> TcnConfig {
        TcnConfig {
            input_dim,
            hidden_channels: hidden,
            head_hidden: 5,
            output_dim: 2,
            kernel_size: 2,
            dropout_rate: 0.0,
            ..TcnConfig::new(input_dim, 2, PositionalEncodingConfig::disabled()).with_blocks(blocks)
        }
    }

    #[test]
    fn projection_only_when_channels_change() {
        let m = TcnModel::<f64>::new(config(3, 4, 2)).unwrap();
        assert!(m.params().id("block0.downsample.weight").is_some());
        assert!(m.params().id("block1.downsample.weight").is_none());
        let m = TcnModel::<f64>::new(config(4, 4, 2)).unwrap();
        assert!(m.params().id("block0.downsample.weight").is_none());
    }

    #[test]
    fn single_row_input() {
        let m = TcnModel::<f64>::initialized(config(3, 4, 2), 1).unwrap();
        let y = m.forward(&Matrix::zeros(1, 3), false, &mut RngState::new(0)).unwrap();
        assert_eq!(y.shape(), (1, 2));
    }

    #[test]
    fn zero_input_zero_biases_gives_zero_output() {
        let m = TcnModel::<f64>::initialized(config(3, 4, 2), 1).unwrap();
        let y = m.forward(&Matrix::zeros(6, 3), true, &mut RngState::new(0)).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_width_and_empty_input() {
        let m = TcnModel::<f64>::initialized(config(3, 4, 1), 1).unwrap();
        let mut rng = RngState::new(0);
        assert!(matches!(m.forward(&Matrix::zeros(4, 2), false, &mut rng), Err(Error::Shape(_))));
        assert!(matches!(m.forward(&Matrix::zeros(0, 3), false, &mut rng), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn with_params_checks_layout() {
        let a = TcnModel::<f64>::initialized(config(3, 4, 1), 1).unwrap();
        let b = TcnModel::<f64>::initialized(config(3, 5, 1), 1).unwrap();
        assert!(a.with_params(b.params().clone()).is_err());
        assert!(a.with_params(a.params().clone()).is_ok());
    }
}
