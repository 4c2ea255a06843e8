// SPDX-License-Identifier: Apache-2.0
//! Per-layer layouts. Fragments use tile ids local to the layer; the
//! compiler renumbers them.

use serde::{Deserialize, Serialize};

use super::{
    CellBudget, MappingScheme, Pass, PassOutput, Placement, RowDrive, BIAS_ROWS, TILE_COLS,
    TILE_ROWS,
};
use crate::nn::Conv1dSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvDims {
    pub n_filters: usize,
    pub in_channels: usize,
    pub kernel_len: usize,
    pub input_len: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub stride: usize,
    pub bias: bool,
}

impl ConvDims {
    /// Single input channel, stride 1, no padding.
    pub fn new(n_filters: usize, kernel_len: usize, input_len: usize, bias: bool) -> Self {
        Self {
            n_filters,
            in_channels: 1,
            kernel_len,
            input_len,
            pad_left: 0,
            pad_right: 0,
            stride: 1,
            bias,
        }
    }

    pub fn from_spec(c: &Conv1dSpec, input_len: usize) -> Self {
        Self {
            n_filters: c.out_channels,
            in_channels: c.in_channels,
            kernel_len: c.kernel_size,
            input_len,
            pad_left: c.padding_left,
            pad_right: c.padding_right,
            stride: c.stride,
            bias: true,
        }
    }

    pub fn padded_len(&self) -> usize {
        self.input_len + self.pad_left + self.pad_right
    }

    /// Number of output positions of the sliding window.
    pub fn positions(&self) -> Result<usize> {
        if self.kernel_len == 0 || self.stride == 0 || self.n_filters == 0 || self.in_channels == 0
        {
            return Err(Error::InvalidSpec(format!(
                "degenerate convolution {self:?}"
            )));
        }
        let span = self.padded_len() as i64 - self.kernel_len as i64;
        if span < 0 {
            return Err(Error::EmptyOutput { len: span });
        }
        Ok(span as usize / self.stride + 1)
    }

    fn weight_index(&self, c: usize, j: usize, t: usize) -> usize {
        (c * self.in_channels + j) * self.kernel_len + t
    }

    fn bias_index(&self, c: usize) -> usize {
        self.n_filters * self.in_channels * self.kernel_len + c
    }

    fn params_per_copy(&self) -> usize {
        self.n_filters * self.in_channels * self.kernel_len
            + if self.bias { self.n_filters } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFragment {
    pub tiles: usize,
    pub placements: Vec<Placement>,
    pub passes: Vec<Pass>,
    pub bias_rows: Vec<Vec<usize>>,
    pub budget: CellBudget,
}

impl LayerFragment {
    fn cells(&self) -> usize {
        self.placements.len() * 2
    }
}

fn place(index: usize, tile: usize, row: usize, pair: usize) -> Placement {
    Placement {
        layer: 0,
        index,
        tile,
        row,
        col_plus: 2 * pair,
        col_minus: 2 * pair + 1,
    }
}

/// im2col layout: every output position gets its own copy of every kernel.
///
/// Columns are position-major (pair `q = p·n_filters + c`), 32 pairs per
/// tile. Input rows are split into blocks of `64 - 2` so each tile keeps its
/// two bias rows; bias values are written only on the first row block.
pub fn plan_conv_staggered(dims: &ConvDims) -> Result<LayerFragment> {
    let positions = dims.positions()?;
    let padded = dims.padded_len();
    let input_rows = dims.in_channels * padded;
    let rows_per_block = TILE_ROWS - BIAS_ROWS;
    let pairs_per_tile = TILE_COLS / 2;
    let row_blocks = input_rows.div_ceil(rows_per_block);
    let total_pairs = positions * dims.n_filters;
    let col_blocks = total_pairs.div_ceil(pairs_per_tile);

    let mut placements = Vec::with_capacity(positions * dims.params_per_copy());
    let mut passes = Vec::new();
    let mut bias_rows = Vec::new();
    let mut tile = 0;
    for cb in 0..col_blocks {
        for rb in 0..row_blocks {
            let row_lo = rb * rows_per_block;
            let row_hi = (row_lo + rows_per_block).min(input_rows);
            let start = placements.len();
            let mut outputs = Vec::new();
            for q in cb * pairs_per_tile..((cb + 1) * pairs_per_tile).min(total_pairs) {
                let (p, c) = (q / dims.n_filters, q % dims.n_filters);
                let pair = q - cb * pairs_per_tile;
                let mut touched = false;
                for j in 0..dims.in_channels {
                    for t in 0..dims.kernel_len {
                        let r = j * padded + p * dims.stride + t;
                        if (row_lo..row_hi).contains(&r) {
                            placements.push(place(
                                dims.weight_index(c, j, t),
                                tile,
                                r - row_lo,
                                pair,
                            ));
                            touched = true;
                        }
                    }
                }
                if dims.bias && rb == 0 {
                    placements.push(place(dims.bias_index(c), tile, rows_per_block, pair));
                    touched = true;
                }
                if touched {
                    outputs.push(PassOutput {
                        col_plus: 2 * pair,
                        col_minus: 2 * pair + 1,
                        output: c * positions + p,
                    });
                }
            }
            if placements.len() == start {
                continue;
            }
            let mut rows: Vec<(usize, RowDrive)> = (row_lo..row_hi)
                .map(|r| (r - row_lo, RowDrive::Input(r)))
                .collect();
            if dims.bias && rb == 0 {
                rows.push((rows_per_block, RowDrive::Bias));
            }
            passes.push(Pass {
                layer: 0,
                tile,
                step: 0,
                rows,
                outputs,
            });
            bias_rows.push((rows_per_block..TILE_ROWS).collect());
            tile += 1;
        }
    }

    let bias_extra = if dims.bias { BIAS_ROWS } else { 0 };
    let mut frag = LayerFragment {
        tiles: tile,
        placements,
        passes,
        bias_rows,
        budget: CellBudget::default(),
    };
    frag.budget = CellBudget {
        cells_used: frag.cells(),
        cells_used_incl_sparsity: (input_rows + bias_extra) * total_pairs * 2,
        pass_count: 1,
    };
    Ok(frag)
}

/// Weight-stationary layout on a single tile: filter `c` on columns
/// `(2c, 2c+1)`, kernel taps on rows `j·k + t`, bias on the first of the two
/// rows that follow. One pass per output position.
pub fn plan_conv_weight_stationary(dims: &ConvDims) -> Result<LayerFragment> {
    let positions = dims.positions()?;
    let kernel_rows = dims.in_channels * dims.kernel_len;
    let rows = kernel_rows + BIAS_ROWS;
    let cols = 2 * dims.n_filters;
    if rows > TILE_ROWS || cols > TILE_COLS {
        return Err(Error::ExceedsTile {
            what: format!(
                "kernel of length {} x {} channel(s) with {} filters plus {BIAS_ROWS} bias rows",
                dims.kernel_len, dims.in_channels, dims.n_filters
            ),
            rows,
            cols,
            tile_rows: TILE_ROWS,
            tile_cols: TILE_COLS,
        });
    }
    let padded = dims.padded_len();
    let mut placements = Vec::with_capacity(dims.params_per_copy());
    for c in 0..dims.n_filters {
        for j in 0..dims.in_channels {
            for t in 0..dims.kernel_len {
                placements.push(place(
                    dims.weight_index(c, j, t),
                    0,
                    j * dims.kernel_len + t,
                    c,
                ));
            }
        }
        if dims.bias {
            placements.push(place(dims.bias_index(c), 0, kernel_rows, c));
        }
    }
    let passes = (0..positions)
        .map(|p| {
            let mut rows: Vec<(usize, RowDrive)> = (0..dims.in_channels)
                .flat_map(|j| {
                    (0..dims.kernel_len).map(move |t| {
                        (
                            j * dims.kernel_len + t,
                            RowDrive::Input(j * padded + p * dims.stride + t),
                        )
                    })
                })
                .collect();
            if dims.bias {
                rows.push((kernel_rows, RowDrive::Bias));
            }
            Pass {
                layer: 0,
                tile: 0,
                step: p,
                rows,
                outputs: (0..dims.n_filters)
                    .map(|c| PassOutput {
                        col_plus: 2 * c,
                        col_minus: 2 * c + 1,
                        output: c * positions + p,
                    })
                    .collect(),
            }
        })
        .collect();
    let cells = placements.len() * 2;
    Ok(LayerFragment {
        tiles: 1,
        placements,
        passes,
        bias_rows: vec![(kernel_rows..rows).collect()],
        budget: CellBudget {
            cells_used: cells,
            cells_used_incl_sparsity: cells,
            pass_count: positions,
        },
    })
}

#[derive(Debug, Clone, Copy)]
struct Section {
    row_block: usize,
    col_chunk: usize,
    /// Section holding only the bias row.
    bias_only: bool,
    /// Bias row appended after this section's inputs.
    with_bias: bool,
}

fn fc_sections(in_features: usize, out_features: usize, bias: bool) -> Vec<Section> {
    let row_blocks = in_features.div_ceil(TILE_ROWS);
    let chunks = out_features.div_ceil(TILE_COLS / 2);
    let tail = in_features - (row_blocks - 1) * TILE_ROWS;
    let bias_fits = bias && tail < TILE_ROWS;
    let mut out = Vec::new();
    for cb in 0..chunks {
        for rb in 0..row_blocks {
            out.push(Section {
                row_block: rb,
                col_chunk: cb,
                bias_only: false,
                with_bias: bias_fits && rb + 1 == row_blocks,
            });
        }
        if bias && !bias_fits {
            out.push(Section {
                row_block: row_blocks,
                col_chunk: cb,
                bias_only: true,
                with_bias: true,
            });
        }
    }
    out
}

fn chunk_width(out_features: usize, cb: usize) -> usize {
    let per = TILE_COLS / 2;
    (out_features - cb * per).min(per)
}

fn emit_section(
    in_features: usize,
    out_features: usize,
    s: &Section,
    tile: usize,
    row0: usize,
    col0: usize,
    step: usize,
    placements: &mut Vec<Placement>,
) -> Pass {
    let per = TILE_COLS / 2;
    let width = chunk_width(out_features, s.col_chunk);
    let pair0 = col0 / 2;
    let mut rows = Vec::new();
    let mut next_row = row0;
    if !s.bias_only {
        let lo = s.row_block * TILE_ROWS;
        let hi = (lo + TILE_ROWS).min(in_features);
        for i in lo..hi {
            let row = row0 + (i - lo);
            for k in 0..width {
                let o = s.col_chunk * per + k;
                placements.push(place(o * in_features + i, tile, row, pair0 + k));
            }
            rows.push((row, RowDrive::Input(i)));
        }
        next_row = row0 + (hi - lo);
    }
    if s.with_bias {
        for k in 0..width {
            let o = s.col_chunk * per + k;
            placements.push(place(
                in_features * out_features + o,
                tile,
                next_row,
                pair0 + k,
            ));
        }
        rows.push((next_row, RowDrive::Bias));
    }
    Pass {
        layer: 0,
        tile,
        step,
        rows,
        outputs: (0..width)
            .map(|k| PassOutput {
                col_plus: col0 + 2 * k,
                col_minus: col0 + 2 * k + 1,
                output: s.col_chunk * per + k,
            })
            .collect(),
    }
}

/// Fully connected layout: inputs in sections of 64 rows, outputs in chunks
/// of up to 32 pairs, sections packed side by side across each tile. Each
/// section sharing a tile is read in its own time step because its inputs
/// arrive on the same rows.
pub fn plan_fc(in_features: usize, out_features: usize, bias: bool) -> Result<LayerFragment> {
    if in_features == 0 || out_features == 0 {
        return Err(Error::InvalidSpec(format!(
            "fully connected layer {in_features}x{out_features}"
        )));
    }
    let mut placements = Vec::with_capacity((in_features + 1) * out_features);
    let mut passes = Vec::new();
    let mut tile = 0;
    let mut col = 0;
    let mut step = 0;
    let mut any = false;
    for s in fc_sections(in_features, out_features, bias) {
        let width = 2 * chunk_width(out_features, s.col_chunk);
        if any && col + width > TILE_COLS {
            tile += 1;
            col = 0;
            step = 0;
        }
        passes.push(emit_section(
            in_features,
            out_features,
            &s,
            tile,
            0,
            col,
            step,
            &mut placements,
        ));
        col += width;
        step += 1;
        any = true;
    }
    let tiles = tile + 1;
    let pass_count = (0..tiles)
        .map(|t| passes.iter().filter(|p| p.tile == t).count())
        .max()
        .unwrap_or(0);
    let cells = placements.len() * 2;
    Ok(LayerFragment {
        tiles,
        placements,
        passes,
        bias_rows: vec![Vec::new(); tiles],
        budget: CellBudget {
            cells_used: cells,
            cells_used_incl_sparsity: cells,
            pass_count,
        },
    })
}

/// Places a small FC layer as one section in the bottom-left corner of an
/// existing tile, below `free_from_row`. Returns `None` when it does not fit.
pub(crate) fn plan_fc_in_corner(
    in_features: usize,
    out_features: usize,
    bias: bool,
    free_from_row: usize,
) -> Option<LayerFragment> {
    let rows = in_features + usize::from(bias);
    if rows > TILE_ROWS - free_from_row || 2 * out_features > TILE_COLS {
        return None;
    }
    let s = Section {
        row_block: 0,
        col_chunk: 0,
        bias_only: false,
        with_bias: bias,
    };
    let mut placements = Vec::new();
    let pass = emit_section(
        in_features,
        out_features,
        &s,
        0,
        TILE_ROWS - rows,
        0,
        0,
        &mut placements,
    );
    let cells = placements.len() * 2;
    Some(LayerFragment {
        tiles: 1,
        placements,
        passes: vec![pass],
        bias_rows: vec![Vec::new()],
        budget: CellBudget {
            cells_used: cells,
            cells_used_incl_sparsity: cells,
            pass_count: 1,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Area,
    Latency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub staggered: CellBudget,
    pub weight_stationary: CellBudget,
    /// `cells(staggered) / cells(weight_stationary)`.
    pub area_reduction: f64,
    /// `passes(weight_stationary) / passes(staggered)`.
    pub computation_increase: f64,
    pub recommendation: MappingScheme,
}

/// Budgets of both conv layouts. Under [`Priority::Area`] weight-stationary
/// wins only when it uses strictly fewer cells; under [`Priority::Latency`]
/// the single-pass staggered layout wins unless pass counts tie.
pub fn compare_schemes(
    n_filters: usize,
    kernel_len: usize,
    input_len: usize,
    priority: Priority,
) -> Result<SchemeComparison> {
    let dims = ConvDims::new(n_filters, kernel_len, input_len, true);
    let a = staggered_budget(&dims)?;
    let b = weight_stationary_budget(&dims)?;
    let recommendation = match priority {
        Priority::Area if b.cells_used < a.cells_used => MappingScheme::WeightStationary,
        Priority::Latency if b.pass_count <= a.pass_count && b.cells_used < a.cells_used => {
            MappingScheme::WeightStationary
        }
        _ => MappingScheme::Staggered,
    };
    Ok(SchemeComparison {
        staggered: a,
        weight_stationary: b,
        area_reduction: a.cells_used as f64 / b.cells_used as f64,
        computation_increase: b.pass_count as f64 / a.pass_count as f64,
        recommendation,
    })
}

/// Staggered budget without materialising placements.
pub(crate) fn staggered_budget(dims: &ConvDims) -> Result<CellBudget> {
    let positions = dims.positions()?;
    let bias_extra = if dims.bias { BIAS_ROWS } else { 0 };
    Ok(CellBudget {
        cells_used: positions * dims.params_per_copy() * 2,
        cells_used_incl_sparsity: (dims.in_channels * dims.padded_len() + bias_extra)
            * positions
            * dims.n_filters
            * 2,
        pass_count: 1,
    })
}

/// Weight-stationary budget; ignores the single-tile limit.
pub(crate) fn weight_stationary_budget(dims: &ConvDims) -> Result<CellBudget> {
    let positions = dims.positions()?;
    let cells = dims.params_per_copy() * 2;
    Ok(CellBudget {
        cells_used: cells,
        cells_used_incl_sparsity: cells,
        pass_count: positions,
    })
}
