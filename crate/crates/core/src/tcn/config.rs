use crate::error::{Error, Result};
use crate::seqdata::PositionalEncodingConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct TcnConfig {
    /// Columns the model consumes: feature dim plus any positional columns.
    pub input_dim: usize,
    pub hidden_channels: usize,
    pub num_blocks: usize,
    pub kernel_size: usize,
    /// One dilation per block; both convs of a block share it.
    pub dilation_schedule: Vec<usize>,
    /// Dropout inside residual blocks.
    pub dropout_rate: f64,
    pub head_hidden: usize,
    /// Number of expressions predicted per timestamp.
    pub output_dim: usize,
    /// Encoding applied to the inputs this model was built for. Not applied by
    /// the model itself; recorded so inference can rebuild the input pipeline.
    pub positional: PositionalEncodingConfig,
}

/// `[1, 2, 4, ...]`.
pub fn exponential_dilations(num_blocks: usize) -> Vec<usize> {
    (0..num_blocks).map(|b| 1usize << b).collect()
}

impl TcnConfig {
    /// Defaults: 4 blocks of 64 channels, kernel 3, dilations `2^b`, head width 64, dropout 0.2.
    pub fn new(feature_dim: usize, output_dim: usize, positional: PositionalEncodingConfig) -> Self {
        TcnConfig {
            input_dim: feature_dim + positional.added_columns(),
            hidden_channels: 64,
            num_blocks: 4,
            kernel_size: 3,
            dilation_schedule: exponential_dilations(4),
            dropout_rate: 0.2,
            head_hidden: 64,
            output_dim,
            positional,
        }
    }

    pub fn with_blocks(mut self, num_blocks: usize) -> Self {
        self.num_blocks = num_blocks;
        self.dilation_schedule = exponential_dilations(num_blocks);
        self
    }

    pub fn feature_dim(&self) -> usize {
        self.input_dim.saturating_sub(self.positional.added_columns())
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_blocks != self.dilation_schedule.len() {
            problems.push(format!(
                "num_blocks = {} but dilation schedule has {} entries",
                self.num_blocks,
                self.dilation_schedule.len()
            ));
        }
        if self.dilation_schedule.contains(&0) {
            problems.push("dilations must be >= 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            problems.push(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden_channels", self.hidden_channels),
            ("kernel_size", self.kernel_size),
            ("head_hidden", self.head_hidden),
            ("output_dim", self.output_dim),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be >= 1"));
            }
        }
        if self.positional.enabled {
            if let Err(e) = self.positional.validate() {
                problems.push(e.to_string());
            } else if self.input_dim <= self.positional.dim {
                problems.push(format!(
                    "input_dim {} leaves no room for features beside {} positional columns",
                    self.input_dim, self.positional.dim
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

impl TcnConfig {
    /// Scalar parameter count of the model this config builds, `None` on overflow.
    pub fn num_parameters(&self) -> Option<usize> {
        let (h, k) = (self.hidden_channels, self.kernel_size);
        let mut total = 0usize;
        let mut cin = self.input_dim;
        for _ in 0..self.num_blocks {
            let conv1 = h.checked_mul(cin)?.checked_mul(k)?.checked_add(h.checked_mul(2)?)?;
            let conv2 = h.checked_mul(h)?.checked_mul(k)?.checked_add(h.checked_mul(2)?)?;
            let downsample = if cin != h { cin.checked_mul(h)?.checked_add(h)? } else { 0 };
            total = total.checked_add(conv1)?.checked_add(conv2)?.checked_add(downsample)?;
            cin = h;
        }
        let fc1 = cin.checked_mul(self.head_hidden)?.checked_add(self.head_hidden)?;
        let fc2 = self.head_hidden.checked_mul(self.output_dim)?.checked_add(self.output_dim)?;
        total.checked_add(fc1)?.checked_add(fc2)
    }
}

/// Steps of history one output can see: `1 + sum_b 2 (k-1) d_b`, two convs per block.
pub fn receptive_field(config: &TcnConfig) -> usize {
    1 + config
        .dilation_schedule
        .iter()
        .map(|d| 2 * (config.kernel_size - 1) * d)
        .sum::<usize>()
}
