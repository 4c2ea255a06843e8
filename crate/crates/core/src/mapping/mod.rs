// SPDX-License-Identifier: Apache-2.0
//! Placement of network parameters onto 64×64 crossbar tiles.
//!
//! Every signed weight occupies a differential pair of devices on adjacent
//! columns of the same row. A layer's layout is described by its
//! [`Placement`]s (where each parameter lives) and its [`Pass`]es (which rows
//! are driven with which inputs, and which column pairs are read into which
//! outputs, at which time step).

mod compile;
mod layout;
mod pair;

use serde::{Deserialize, Serialize};

pub use compile::{
    compile_network, compile_network_with, input_ranges_bound, input_ranges_calibrated,
    CompileOptions,
};
pub use layout::{
    compare_schemes, plan_conv_staggered, plan_conv_weight_stationary, plan_fc, ConvDims,
    LayerFragment, Priority, SchemeComparison,
};
pub use pair::{map_weight_to_pair, ConductanceWindow, DifferentialPair};

use crate::nn::{Conv1dSpec, FcSpec};

pub const TILE_ROWS: usize = 64;
pub const TILE_COLS: usize = 64;
/// Rows reserved for bias terms on every convolution tile.
pub const BIAS_ROWS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingScheme {
    /// im2col: one kernel copy per output position, single pass.
    Staggered,
    /// Kernels mapped once; the input window slides across passes.
    WeightStationary,
}

impl std::str::FromStr for MappingScheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "staggered" | "a" => Ok(Self::Staggered),
            "stationary" | "weight-stationary" | "b" => Ok(Self::WeightStationary),
            other => Err(crate::Error::Config(format!(
                "unknown mapping scheme {other:?}"
            ))),
        }
    }
}

/// What a row is driven with during a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowDrive {
    /// Element of the layer's zero-padded, channel-major input vector.
    Input(usize),
    /// Constant full-scale drive for bias rows.
    Bias,
}

/// One logical parameter mapped onto a differential pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub layer: usize,
    /// Weight index in row-major order of the layer's weight shape, then
    /// `weight_count + o` for bias `o`.
    pub index: usize,
    pub tile: usize,
    pub row: usize,
    pub col_plus: usize,
    pub col_minus: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassOutput {
    pub col_plus: usize,
    pub col_minus: usize,
    /// Output element receiving this pair's differential current; partial
    /// sums from several passes are added digitally.
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pass {
    pub layer: usize,
    pub tile: usize,
    /// Time slot within the layer; passes on different tiles may share a slot.
    pub step: usize,
    pub rows: Vec<(usize, RowDrive)>,
    pub outputs: Vec<PassOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellBudget {
    pub cells_used: usize,
    /// Bounding-box accounting that includes unused cells inside the layout.
    pub cells_used_incl_sparsity: usize,
    pub pass_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv(Conv1dSpec),
    Fc(FcSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub name: String,
    pub kind: LayerKind,
    /// `None` for fully connected layers, which have a single layout.
    pub scheme: Option<MappingScheme>,
    /// Pipeline stage; layers sharing a stage run concurrently.
    pub stage: usize,
    /// Unpadded per-channel input length.
    pub input_len: usize,
    /// Length of the padded, flattened input vector addressed by [`RowDrive::Input`].
    pub drive_len: usize,
    pub output_len: usize,
    pub budget: CellBudget,
    /// Input magnitude mapped to the DAC full-scale voltage.
    pub input_full_scale: f64,
    /// ADC full-scale current; `None` uses the tile worst case.
    pub adc_full_scale: Option<f64>,
}

impl LayerPlan {
    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv(c) => c.weight_count(),
            LayerKind::Fc(f) => f.in_features * f.out_features,
        }
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Conv(c) => c.out_channels,
            LayerKind::Fc(f) => f.out_features,
        }
    }

    /// Builds the vector addressed by [`RowDrive::Input`] from the unpadded input.
    pub fn drive_vector(&self, input: &[f64]) -> Vec<f64> {
        match self.kind {
            LayerKind::Conv(c) => {
                let padded = c.padded_len(self.input_len);
                let mut out = vec![0.0; c.in_channels * padded];
                for j in 0..c.in_channels {
                    out[j * padded + c.padding_left..][..self.input_len]
                        .copy_from_slice(&input[j * self.input_len..][..self.input_len]);
                }
                out
            }
            LayerKind::Fc(_) => input.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileInfo {
    pub id: usize,
    /// Siemens per unit of encoded weight on this tile.
    pub scale: f64,
    pub layers: Vec<usize>,
    pub bias_rows: Vec<usize>,
}

/// A whole network compiled onto tiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingPlan {
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub window: ConductanceWindow,
    pub tiles: Vec<TileInfo>,
    pub layers: Vec<LayerPlan>,
    pub placements: Vec<Placement>,
    pub passes: Vec<Pass>,
}

impl MappingPlan {
    pub fn total_budget(&self) -> CellBudget {
        self.layers
            .iter()
            .fold(CellBudget::default(), |acc, l| CellBudget {
                cells_used: acc.cells_used + l.budget.cells_used,
                cells_used_incl_sparsity: acc.cells_used_incl_sparsity
                    + l.budget.cells_used_incl_sparsity,
                pass_count: acc.pass_count + l.budget.pass_count,
            })
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn passes_for(&self, layer: usize) -> impl Iterator<Item = &Pass> {
        self.passes.iter().filter(move |p| p.layer == layer)
    }

    /// Encoded value a placement must represent: the weight itself, or for a
    /// bias `b / input_full_scale` because bias rows are driven at full scale.
    pub fn encoded_value(&self, params: &crate::nn::NetworkParams, p: &Placement) -> f64 {
        let layer = &self.layers[p.layer];
        let lp = &params.layers[p.layer];
        let wc = layer.weight_count();
        if p.index < wc {
            lp.weights[p.index]
        } else {
            lp.bias[p.index - wc] / layer.input_full_scale
        }
    }

    /// Per-tile target conductances (row-major, `tile_rows × tile_cols`); unused cells rest at `G_off`.
    pub fn target_conductances(
        &self,
        params: &crate::nn::NetworkParams,
    ) -> crate::Result<Vec<Vec<f64>>> {
        let mut tiles =
            vec![vec![self.window.g_off; self.tile_rows * self.tile_cols]; self.tiles.len()];
        for p in &self.placements {
            let w = self.encoded_value(params, p);
            let pair = map_weight_to_pair(w, self.tiles[p.tile].scale, self.window)?;
            let g = &mut tiles[p.tile];
            g[p.row * self.tile_cols + p.col_plus] = pair.g_plus;
            g[p.row * self.tile_cols + p.col_minus] = pair.g_minus;
        }
        Ok(tiles)
    }

    /// Reads every placement back through the pair encoding. Staggered layouts
    /// hold several copies of each parameter; the first one wins.
    pub fn decompile(
        &self,
        spec: &crate::nn::NetworkSpec,
        conductances: &[Vec<f64>],
    ) -> crate::Result<crate::nn::NetworkParams> {
        let mut params = crate::nn::NetworkParams::zeros(spec);
        let mut seen = std::collections::HashSet::new();
        for p in &self.placements {
            if !seen.insert((p.layer, p.index)) {
                continue;
            }
            let g = &conductances[p.tile];
            let pair = DifferentialPair {
                g_plus: g[p.row * self.tile_cols + p.col_plus],
                g_minus: g[p.row * self.tile_cols + p.col_minus],
            };
            let v = pair.weight(self.tiles[p.tile].scale);
            let layer = &self.layers[p.layer];
            let wc = layer.weight_count();
            let lp = &mut params.layers[p.layer];
            if p.index < wc {
                lp.weights[p.index] = v;
            } else {
                lp.bias[p.index - wc] = v * layer.input_full_scale;
            }
        }
        Ok(params)
    }

    /// Bounds and injectivity check over all placements.
    pub fn check_collisions(&self) -> crate::Result<()> {
        let mut used = std::collections::HashSet::with_capacity(self.placements.len() * 2);
        for p in &self.placements {
            for col in [p.col_plus, p.col_minus] {
                if p.tile >= self.tiles.len() || p.row >= self.tile_rows || col >= self.tile_cols {
                    return Err(crate::Error::ExceedsTile {
                        what: format!("placement of {}[{}]", self.layers[p.layer].name, p.index),
                        rows: p.row + 1,
                        cols: col + 1,
                        tile_rows: self.tile_rows,
                        tile_cols: self.tile_cols,
                    });
                }
                if !used.insert((p.tile, p.row, col)) {
                    return Err(crate::Error::Collision {
                        tile: p.tile,
                        row: p.row,
                        col,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
