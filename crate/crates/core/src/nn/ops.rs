// SPDX-License-Identifier: Apache-2.0
//! Floating-point reference kernels.

use crate::{Error, Result};

/// Channel-major multi-channel signal: `data[c * len + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Activations {
    pub fn new(channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::ShapeMismatch {
                context: "activations".into(),
                expected: format!("{channels}x{len}"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self {
            channels,
            len,
            data,
        })
    }

    pub fn single(values: &[f64]) -> Self {
        Self {
            channels: 1,
            len: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    /// Concatenates along channels; all inputs must share a length.
    pub fn concat(parts: &[Activations]) -> Result<Self> {
        let len = parts.first().map(|p| p.len).unwrap_or(0);
        if let Some(p) = parts.iter().find(|p| p.len != len) {
            return Err(Error::ShapeMismatch {
                context: "concat".into(),
                expected: format!("length {len}"),
                actual: format!("length {}", p.len),
            });
        }
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Ok(Self {
            channels: parts.iter().map(|p| p.channels).sum(),
            len,
            data,
        })
    }

    /// Zero-padded copy, `pad_left` zeros before and `pad_right` after each channel.
    pub fn padded(&self, pad_left: usize, pad_right: usize) -> Activations {
        let len = self.len + pad_left + pad_right;
        let mut data = vec![0.0; self.channels * len];
        for c in 0..self.channels {
            data[c * len + pad_left..c * len + pad_left + self.len]
                .copy_from_slice(self.channel(c));
        }
        Activations {
            channels: self.channels,
            len,
            data,
        }
    }
}

/// `out[c][i] = bias[c] + Σ_{j,t} kernel[c][j][t] · in_padded[j][i·stride + t]`.
///
/// `kernels` is `out_channels × in_channels × k` row-major.
pub fn conv1d(
    input: &Activations,
    kernels: &[f64],
    bias: &[f64],
    kernel_size: usize,
    stride: usize,
    pad_left: usize,
    pad_right: usize,
) -> Result<Activations> {
    let out_channels = bias.len();
    if kernel_size == 0 || stride == 0 {
        return Err(Error::InvalidSpec(
            "conv kernel and stride must be >= 1".into(),
        ));
    }
    if kernels.len() != out_channels * input.channels * kernel_size {
        return Err(Error::ShapeMismatch {
            context: "conv1d kernels".into(),
            expected: format!("{out_channels}x{}x{kernel_size}", input.channels),
            actual: format!("{} values", kernels.len()),
        });
    }
    let x = input.padded(pad_left, pad_right);
    let span = x.len as i64 - kernel_size as i64;
    if span < 0 {
        return Err(Error::EmptyOutput { len: span });
    }
    let out_len = span as usize / stride + 1;
    let mut out = vec![0.0; out_channels * out_len];
    for c in 0..out_channels {
        for i in 0..out_len {
            let mut acc = bias[c];
            for j in 0..input.channels {
                let k = &kernels[(c * input.channels + j) * kernel_size..][..kernel_size];
                let window = &x.channel(j)[i * stride..i * stride + kernel_size];
                acc += k.iter().zip(window).map(|(a, b)| a * b).sum::<f64>();
            }
            out[c * out_len + i] = acc;
        }
    }
    Activations::new(out_channels, out_len, out)
}

/// Floor-mode average pooling per channel.
pub fn avgpool1d(input: &Activations, kernel_size: usize, stride: usize) -> Result<Activations> {
    if kernel_size == 0 || stride == 0 {
        return Err(Error::InvalidSpec(
            "pool kernel and stride must be >= 1".into(),
        ));
    }
    if input.len < kernel_size {
        return Err(Error::EmptyOutput {
            len: input.len as i64 - kernel_size as i64,
        });
    }
    let out_len = (input.len - kernel_size) / stride + 1;
    let mut out = Vec::with_capacity(input.channels * out_len);
    for c in 0..input.channels {
        let ch = input.channel(c);
        for i in 0..out_len {
            let w = &ch[i * stride..i * stride + kernel_size];
            out.push(w.iter().sum::<f64>() / kernel_size as f64);
        }
    }
    Activations::new(input.channels, out_len, out)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Affine map with `weights` stored `out × in` row-major: `y = W x + b`.
pub fn fully_connected(x: &[f64], weights: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let out = bias.len();
    if weights.len() != out * x.len() {
        return Err(Error::ShapeMismatch {
            context: "fully_connected weights".into(),
            expected: format!("{out}x{}", x.len()),
            actual: format!("{} values", weights.len()),
        });
    }
    Ok(weights
        .chunks_exact(x.len().max(1))
        .take(out)
        .zip(bias)
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect())
}
