// SPDX-License-Identifier: Apache-2.0
//! Architecture family: `L` blocks of two parallel convolutions, each
//! followed by average pooling and concatenated along channels, then `D`
//! fully connected layers ending in two logits.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv1dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding_left: usize,
    pub padding_right: usize,
}

impl Conv1dSpec {
    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if self.kernel_size == 0 || self.stride == 0 || self.out_channels == 0 {
            return Err(Error::InvalidSpec(format!(
                "conv needs kernel, stride and out_channels >= 1, got {self:?}"
            )));
        }
        let padded = (input_len + self.padding_left + self.padding_right) as i64;
        let span = padded - self.kernel_size as i64;
        if span < 0 {
            return Err(Error::EmptyOutput { len: span });
        }
        Ok(span as usize / self.stride + 1)
    }

    pub fn padded_len(&self, input_len: usize) -> usize {
        input_len + self.padding_left + self.padding_right
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kernel_size: usize,
    pub stride: usize,
}

impl PoolSpec {
    pub const PAIR: PoolSpec = PoolSpec {
        kernel_size: 2,
        stride: 2,
    };

    /// Floor-mode output length; a trailing remainder is dropped.
    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if self.kernel_size == 0 || self.stride == 0 {
            return Err(Error::InvalidSpec(format!("pool with zero size: {self:?}")));
        }
        if input_len < self.kernel_size {
            return Err(Error::EmptyOutput {
                len: input_len as i64 - self.kernel_size as i64,
            });
        }
        Ok((input_len - self.kernel_size) / self.stride + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcSpec {
    pub in_features: usize,
    pub out_features: usize,
    /// ReLU applied to this layer's output.
    pub relu: bool,
}

/// Flat layer description used for display and shape checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv1d(Conv1dSpec),
    AvgPool1d(PoolSpec),
    Relu,
    FullyConnected(FcSpec),
    Concat { branches: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub conv: Conv1dSpec,
    pub pool: PoolSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub input_len: usize,
    pub branches: Vec<Branch>,
    /// Common pooled length of every branch.
    pub output_len: usize,
}

impl ConvBlock {
    pub fn output_channels(&self) -> usize {
        self.branches.iter().map(|b| b.conv.out_channels).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_length: usize,
    pub input_channels: usize,
    pub blocks: Vec<ConvBlock>,
    pub fc: Vec<FcSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Conv(Conv1dSpec),
    Fc(FcSpec),
}

/// A layer that owns weights and a bias vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayer {
    pub name: String,
    pub kind: ParamKind,
    /// Block index for convolutions, `blocks.len() + i` for the i-th FC layer.
    pub stage: usize,
    /// Length of this layer's (unpadded) input per channel.
    pub input_len: usize,
}

impl ParamLayer {
    pub fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            ParamKind::Conv(c) => vec![c.out_channels, c.in_channels, c.kernel_size],
            ParamKind::Fc(f) => vec![f.out_features, f.in_features],
        }
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            ParamKind::Conv(c) => c.out_channels,
            ParamKind::Fc(f) => f.out_features,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.weight_shape().iter().product()
    }
}

impl NetworkSpec {
    /// The architecture used throughout: m=64, n=64, L=1, D=2, α=[32], β=[8].
    pub fn canonical() -> Self {
        build_network_architecture(64, 64, 1, 2, &[32], &[8], true)
            .expect("canonical architecture is valid")
    }

    /// Assembles a spec from explicit parts and checks every shape.
    pub fn from_parts(
        input_length: usize,
        input_channels: usize,
        blocks: Vec<ConvBlock>,
        fc: Vec<FcSpec>,
    ) -> Result<Self> {
        let spec = Self {
            input_length,
            input_channels,
            blocks,
            fc,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut channels = self.input_channels;
        let mut len = self.input_length;
        for (bi, block) in self.blocks.iter().enumerate() {
            if block.input_len != len {
                return Err(Error::InvalidSpec(format!(
                    "block {bi} expects input length {}, previous stage produces {len}",
                    block.input_len
                )));
            }
            if block.branches.is_empty() {
                return Err(Error::InvalidSpec(format!("block {bi} has no branches")));
            }
            for br in &block.branches {
                if br.conv.in_channels != channels {
                    return Err(Error::InvalidSpec(format!(
                        "block {bi} conv expects {} input channels, got {channels}",
                        br.conv.in_channels
                    )));
                }
                let pooled = br.pool.output_len(br.conv.output_len(len)?)?;
                if pooled != block.output_len {
                    return Err(Error::InvalidSpec(format!(
                        "block {bi} branch pools to length {pooled}, block declares {}",
                        block.output_len
                    )));
                }
            }
            channels = block.output_channels();
            len = block.output_len;
        }
        let mut features = channels * len;
        for (i, fc) in self.fc.iter().enumerate() {
            if fc.in_features != features || fc.out_features == 0 {
                return Err(Error::InvalidSpec(format!(
                    "fc{} is {}->{}, but {features} features arrive",
                    i + 1,
                    fc.in_features,
                    fc.out_features
                )));
            }
            features = fc.out_features;
        }
        if let Some(last) = self.fc.last() {
            if last.out_features != 2 {
                return Err(Error::InvalidSpec(format!(
                    "last FC layer must have 2 outputs, has {}",
                    last.out_features
                )));
            }
        }
        Ok(())
    }

    /// Width of the flattened feature vector entering the first FC layer.
    pub fn flatten_width(&self) -> usize {
        match self.blocks.last() {
            Some(b) => b.output_channels() * b.output_len,
            None => self.input_channels * self.input_length,
        }
    }

    pub fn output_len(&self) -> usize {
        self.fc
            .last()
            .map(|f| f.out_features)
            .unwrap_or(self.flatten_width())
    }

    /// Layers carrying parameters, in MXW1 order: `conv1..convK` then `fc1..fcD`.
    pub fn param_layers(&self) -> Vec<ParamLayer> {
        let mut out = Vec::new();
        let mut conv_idx = 0;
        for (bi, block) in self.blocks.iter().enumerate() {
            for br in &block.branches {
                conv_idx += 1;
                out.push(ParamLayer {
                    name: format!("conv{conv_idx}"),
                    kind: ParamKind::Conv(br.conv),
                    stage: bi,
                    input_len: block.input_len,
                });
            }
        }
        for (i, fc) in self.fc.iter().enumerate() {
            out.push(ParamLayer {
                name: format!("fc{}", i + 1),
                kind: ParamKind::Fc(*fc),
                stage: self.blocks.len() + i,
                input_len: fc.in_features,
            });
        }
        out
    }

    /// Flat layer listing (branches of a block are listed in order, then a Concat).
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        for block in &self.blocks {
            for br in &block.branches {
                out.push(LayerSpec::Conv1d(br.conv));
                out.push(LayerSpec::AvgPool1d(br.pool));
            }
            out.push(LayerSpec::Concat {
                branches: block.branches.len(),
            });
        }
        for fc in &self.fc {
            out.push(LayerSpec::FullyConnected(*fc));
            if fc.relu {
                out.push(LayerSpec::Relu);
            }
        }
        out
    }
}

/// Smallest left padding that brings each branch's pooled length up to the
/// longest one. Returns `(pad_left, pooled_len)` per branch.
pub(crate) fn balance_paddings(
    input_len: usize,
    kernels: &[usize],
    pool: PoolSpec,
) -> Result<Vec<usize>> {
    let pooled = |k: usize, pad: usize| -> Result<usize> {
        let conv = Conv1dSpec {
            in_channels: 1,
            out_channels: 1,
            kernel_size: k,
            stride: 1,
            padding_left: pad,
            padding_right: 0,
        };
        pool.output_len(conv.output_len(input_len)?)
    };
    let natural = kernels
        .iter()
        .map(|&k| pooled(k, 0))
        .collect::<Result<Vec<_>>>()?;
    let target = natural.iter().copied().max().unwrap_or(0);
    kernels
        .iter()
        .map(|&k| {
            let mut pad = 0;
            while pooled(k, pad)? < target {
                pad += 1;
            }
            Ok(pad)
        })
        .collect()
}

/// Generates the architecture for tile size `m × n`.
///
/// Each block has `floor(n/2)` filters per branch; with `parallel` the two
/// branch kernels are `alpha[l]` and `m - 2 - alpha[l]`, otherwise a single
/// branch with kernel `m - 1`. Branches are padded on the left just enough
/// for both to pool to the same length. FC widths come from `beta`, and the
/// last layer always has two outputs.
pub fn build_network_architecture(
    m: usize,
    n: usize,
    blocks: usize,
    fc_layers: usize,
    alpha: &[usize],
    beta: &[usize],
    parallel: bool,
) -> Result<NetworkSpec> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidSpec("m and n must be >= 1".into()));
    }
    if n / 2 == 0 {
        return Err(Error::InvalidSpec(format!(
            "n = {n} gives zero output channels per branch"
        )));
    }
    if parallel && alpha.len() != blocks {
        return Err(Error::ShapeMismatch {
            context: "alpha".into(),
            expected: format!("{blocks} kernel sizes"),
            actual: format!("{}", alpha.len()),
        });
    }
    if fc_layers == 0 {
        return Err(Error::InvalidSpec(
            "at least one FC layer is required".into(),
        ));
    }
    if beta.len() != fc_layers - 1 {
        return Err(Error::ShapeMismatch {
            context: "beta".into(),
            expected: format!("{} widths", fc_layers - 1),
            actual: format!("{}", beta.len()),
        });
    }

    let pool = PoolSpec::PAIR;
    let filters = n / 2;
    let mut channels = 1;
    let mut len = m;
    let mut conv_blocks = Vec::with_capacity(blocks);
    for l in 0..blocks {
        let kernels = if parallel {
            let a = alpha[l];
            if a < 1 || a + 3 > m {
                return Err(Error::InvalidSpec(format!(
                    "alpha[{l}] = {a} outside [1, {}]",
                    m.saturating_sub(3)
                )));
            }
            vec![a, m - 2 - a]
        } else {
            vec![m - 1]
        };
        let pads = balance_paddings(len, &kernels, pool)?;
        let branches: Vec<Branch> = kernels
            .iter()
            .zip(&pads)
            .map(|(&k, &pad)| Branch {
                conv: Conv1dSpec {
                    in_channels: channels,
                    out_channels: filters,
                    kernel_size: k,
                    stride: 1,
                    padding_left: pad,
                    padding_right: 0,
                },
                pool,
            })
            .collect();
        let out_len = pool.output_len(branches[0].conv.output_len(len)?)?;
        let block = ConvBlock {
            input_len: len,
            output_len: out_len,
            branches,
        };
        channels = block.output_channels();
        len = out_len;
        conv_blocks.push(block);
    }

    let mut features = channels * len;
    let mut fc = Vec::with_capacity(fc_layers);
    for d in 0..fc_layers {
        let out = if d + 1 == fc_layers { 2 } else { beta[d] };
        if out == 0 {
            return Err(Error::InvalidSpec(format!("beta[{d}] is zero")));
        }
        fc.push(FcSpec {
            in_features: features,
            out_features: out,
            relu: d + 1 != fc_layers,
        });
        features = out;
    }
    NetworkSpec::from_parts(m, 1, conv_blocks, fc)
}

/// Number of weights plus biases. Pooling, ReLU and concatenation carry none.
pub fn count_parameters(spec: &NetworkSpec) -> usize {
    spec.param_layers()
        .iter()
        .map(|l| l.weight_count() + l.bias_len())
        .sum()
}
