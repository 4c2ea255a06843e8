// SPDX-License-Identifier: Apache-2.0
//! Network architecture, reference forward pass and quantizers.

pub(crate) mod arch;
mod forward;
pub mod ops;
mod params;
mod quant;

pub use arch::{
    build_network_architecture, count_parameters, Branch, Conv1dSpec, ConvBlock, FcSpec, LayerSpec,
    NetworkSpec, ParamKind, ParamLayer, PoolSpec,
};
pub use forward::{forward, forward_trace, Trace};
pub use ops::{avgpool1d, conv1d, fully_connected, relu, Activations};
pub use params::{FixedPoint, LayerParams, NetworkParams};
pub use quant::{quantize_fixed, Quantizer};

/// One input window of normalized feature amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> crate::Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(crate::Error::Config(format!(
                "signal value at index {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
