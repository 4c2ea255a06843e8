// SPDX-License-Identifier: Apache-2.0
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arch::{NetworkSpec, ParamLayer};
use super::quant::Quantizer;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub name: String,
    /// Conv: `[out_channels, in_channels, kernel]`; FC: `[out_features, in_features]`.
    pub shape: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Per-tensor fixed-point tag recorded after quantization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub bits: u32,
    /// Symmetric range `[-scale, +scale]` per layer, in layer order.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
    pub fixed_point: Option<FixedPoint>,
}

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self::from_fn(spec, |_, _| 0.0)
    }

    /// Uniform fan-in scaled initialisation, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn random<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        Self::from_fn(spec, |layer, _| {
            let shape = layer.weight_shape();
            let fan_in: usize = shape[1..].iter().product();
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            rng.random_range(-bound..bound)
        })
    }

    fn from_fn(spec: &NetworkSpec, mut f: impl FnMut(&ParamLayer, usize) -> f64) -> Self {
        let layers = spec
            .param_layers()
            .iter()
            .map(|l| {
                let weights = (0..l.weight_count()).map(|i| f(l, i)).collect();
                let bias = (0..l.bias_len())
                    .map(|i| f(l, l.weight_count() + i))
                    .collect();
                LayerParams {
                    name: l.name.clone(),
                    shape: l.weight_shape(),
                    weights,
                    bias,
                }
            })
            .collect();
        Self {
            layers,
            fixed_point: None,
        }
    }

    pub fn layer(&self, name: &str) -> Option<&LayerParams> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut LayerParams> {
        self.layers.iter_mut().find(|l| l.name == name)
    }

    /// Checks that every parameter layer of `spec` is present with the right shape.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let expected = spec.param_layers();
        if self.layers.len() != expected.len() {
            return Err(Error::ShapeMismatch {
                context: "network parameters".into(),
                expected: format!("{} layers", expected.len()),
                actual: format!("{} layers", self.layers.len()),
            });
        }
        for (p, e) in self.layers.iter().zip(&expected) {
            if p.name != e.name {
                return Err(Error::LayerMismatch {
                    layer: e.name.clone(),
                    detail: format!("found layer named {:?} in its place", p.name),
                });
            }
            if p.shape != e.weight_shape() || p.weights.len() != e.weight_count() {
                return Err(Error::LayerMismatch {
                    layer: e.name.clone(),
                    detail: format!(
                        "weight shape {:?} ({} values), expected {:?}",
                        p.shape,
                        p.weights.len(),
                        e.weight_shape()
                    ),
                });
            }
            if p.bias.len() != e.bias_len() {
                return Err(Error::LayerMismatch {
                    layer: e.name.clone(),
                    detail: format!("{} biases, expected {}", p.bias.len(), e.bias_len()),
                });
            }
        }
        Ok(())
    }

    /// Per-tensor symmetric quantization of weights and biases to `bits`.
    pub fn quantized(&self, bits: u32) -> Result<Self> {
        let mut scales = Vec::with_capacity(self.layers.len());
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let scale = l.max_abs();
                scales.push(scale);
                if scale == 0.0 {
                    return Ok(l.clone());
                }
                let q = Quantizer::new(bits, -scale, scale)?;
                Ok(LayerParams {
                    name: l.name.clone(),
                    shape: l.shape.clone(),
                    weights: l.weights.iter().map(|&w| q.quantize(w)).collect(),
                    bias: l.bias.iter().map(|&b| q.quantize(b)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            fixed_point: Some(FixedPoint { bits, scales }),
        })
    }
}
