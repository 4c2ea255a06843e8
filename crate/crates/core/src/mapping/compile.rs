// SPDX-License-Identifier: Apache-2.0
//! Whole-network compilation.

use super::layout::{
    plan_conv_staggered, plan_conv_weight_stationary, plan_fc, plan_fc_in_corner, ConvDims,
    LayerFragment,
};
use super::{
    ConductanceWindow, LayerKind, LayerPlan, MappingPlan, MappingScheme, TileInfo, BIAS_ROWS,
    TILE_COLS, TILE_ROWS,
};
use crate::nn::{forward_trace, NetworkParams, NetworkSpec, ParamKind, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CompileOptions {
    pub scheme: MappingScheme,
    pub window: ConductanceWindow,
    /// Magnitude of the network input mapped to the DAC full scale.
    pub input_full_scale: f64,
    /// Per-layer input full scales, overriding bound propagation.
    pub layer_input_ranges: Option<Vec<f64>>,
    pub max_tiles: Option<usize>,
    /// Put the last FC layer in the unused rows of the first conv tile
    /// (weight-stationary only).
    pub share_last_fc: bool,
}

impl CompileOptions {
    pub fn new(scheme: MappingScheme) -> Self {
        Self {
            scheme,
            window: ConductanceWindow::default(),
            input_full_scale: 1.0,
            layer_input_ranges: None,
            max_tiles: match scheme {
                MappingScheme::WeightStationary => Some(8),
                MappingScheme::Staggered => None,
            },
            share_last_fc: true,
        }
    }
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self::new(MappingScheme::WeightStationary)
    }
}

pub fn compile_network(
    spec: &NetworkSpec,
    params: &NetworkParams,
    scheme: MappingScheme,
) -> Result<MappingPlan> {
    compile_network_with(spec, params, &CompileOptions::new(scheme))
}

/// Worst-case magnitude of each parameter layer's input when every network
/// input lies in `[-full_scale, full_scale]`.
pub fn input_ranges_bound(
    spec: &NetworkSpec,
    params: &NetworkParams,
    full_scale: f64,
) -> Result<Vec<f64>> {
    params.validate(spec)?;
    let mut out = Vec::new();
    let mut bound = full_scale;
    let mut layers = params.layers.iter();
    for block in &spec.blocks {
        let mut next: f64 = 0.0;
        for br in &block.branches {
            let p = layers.next().expect("validated");
            out.push(bound);
            let per_filter = br.conv.in_channels * br.conv.kernel_size;
            for (c, w) in p.weights.chunks(per_filter).enumerate() {
                let s: f64 = w.iter().map(|v| v.abs()).sum();
                next = next.max(s * bound + p.bias[c].abs());
            }
        }
        bound = next;
    }
    for fc in &spec.fc {
        let p = layers.next().expect("validated");
        out.push(bound);
        let mut next: f64 = 0.0;
        for (o, w) in p.weights.chunks(fc.in_features).enumerate() {
            let s: f64 = w.iter().map(|v| v.abs()).sum();
            next = next.max(s * bound + p.bias[o].abs());
        }
        bound = next;
    }
    Ok(out)
}

/// Largest observed input magnitude of each parameter layer over `samples`,
/// times `margin`.
pub fn input_ranges_calibrated(
    spec: &NetworkSpec,
    params: &NetworkParams,
    samples: &[Signal],
    margin: f64,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mut out = vec![0.0_f64; params.layers.len()];
    for s in samples {
        let t = forward_trace(spec, params, s)?;
        for (m, x) in out.iter_mut().zip(&t.layer_inputs) {
            *m = x.iter().fold(*m, |a, v| a.max(v.abs()));
        }
    }
    Ok(out.into_iter().map(|m| m * margin).collect())
}

fn usable_range(r: f64) -> f64 {
    if r.is_finite() && r > 0.0 {
        r
    } else {
        1.0
    }
}

pub fn compile_network_with(
    spec: &NetworkSpec,
    params: &NetworkParams,
    opts: &CompileOptions,
) -> Result<MappingPlan> {
    spec.validate()?;
    params.validate(spec)?;
    let ranges = match &opts.layer_input_ranges {
        Some(r) if r.len() == params.layers.len() => r.clone(),
        Some(r) => {
            return Err(Error::ShapeMismatch {
                context: "layer input ranges".into(),
                expected: format!("{} values", params.layers.len()),
                actual: format!("{}", r.len()),
            })
        }
        None => input_ranges_bound(spec, params, opts.input_full_scale)?,
    };

    let param_layers = spec.param_layers();
    let n_fc = spec.fc.len();
    let mut plan = MappingPlan {
        tile_rows: TILE_ROWS,
        tile_cols: TILE_COLS,
        window: opts.window,
        tiles: Vec::new(),
        layers: Vec::new(),
        placements: Vec::new(),
        passes: Vec::new(),
    };
    // (tile, first free row from the top) of the first weight-stationary conv.
    let mut corner: Option<(usize, usize)> = None;

    for (li, pl) in param_layers.iter().enumerate() {
        let (kind, scheme, drive_len, output_len, frag, shared_tile) = match pl.kind {
            ParamKind::Conv(c) => {
                let dims = ConvDims::from_spec(&c, pl.input_len);
                let frag = match opts.scheme {
                    MappingScheme::Staggered => plan_conv_staggered(&dims)?,
                    MappingScheme::WeightStationary => plan_conv_weight_stationary(&dims)?,
                };
                let positions = dims.positions()?;
                (
                    LayerKind::Conv(c),
                    Some(opts.scheme),
                    c.in_channels * dims.padded_len(),
                    c.out_channels * positions,
                    frag,
                    None,
                )
            }
            ParamKind::Fc(f) => {
                let last = li + 1 == param_layers.len() && n_fc > 0;
                let mut shared = None;
                let mut frag = None;
                if last && opts.share_last_fc && opts.scheme == MappingScheme::WeightStationary {
                    if let Some((tile, free_row)) = corner {
                        if let Some(fr) =
                            plan_fc_in_corner(f.in_features, f.out_features, true, free_row)
                        {
                            shared = Some(tile);
                            frag = Some(fr);
                        }
                    }
                }
                let frag = match frag {
                    Some(fr) => fr,
                    None => plan_fc(f.in_features, f.out_features, true)?,
                };
                (
                    LayerKind::Fc(f),
                    None,
                    f.in_features,
                    f.out_features,
                    frag,
                    shared,
                )
            }
        };
        let base = plan.tiles.len();
        let tile_map: Vec<usize> = match shared_tile {
            Some(t) => vec![t],
            None => (0..frag.tiles).map(|t| base + t).collect(),
        };
        if shared_tile.is_none() {
            for (t, rows) in frag.bias_rows.iter().enumerate() {
                plan.tiles.push(TileInfo {
                    id: base + t,
                    scale: 0.0,
                    layers: Vec::new(),
                    bias_rows: rows.clone(),
                });
            }
        }
        for &t in &tile_map {
            plan.tiles[t].layers.push(li);
        }
        if corner.is_none() && opts.scheme == MappingScheme::WeightStationary {
            if let LayerKind::Conv(c) = kind {
                corner = Some((tile_map[0], c.in_channels * c.kernel_size + BIAS_ROWS));
            }
        }
        let LayerFragment {
            placements,
            passes,
            budget,
            ..
        } = frag;
        plan.placements.extend(placements.into_iter().map(|mut p| {
            p.layer = li;
            p.tile = tile_map[p.tile];
            p
        }));
        plan.passes.extend(passes.into_iter().map(|mut p| {
            p.layer = li;
            p.tile = tile_map[p.tile];
            p
        }));
        plan.layers.push(LayerPlan {
            name: pl.name.clone(),
            kind,
            scheme,
            stage: pl.stage,
            input_len: pl.input_len,
            drive_len,
            output_len,
            budget,
            input_full_scale: usable_range(ranges[li]),
            adc_full_scale: None,
        });
    }

    if let Some(budget) = opts.max_tiles {
        if plan.tiles.len() > budget {
            return Err(Error::TileBudget {
                needed: plan.tiles.len(),
                budget,
            });
        }
    }

    let mut peak = vec![0.0_f64; plan.tiles.len()];
    for p in &plan.placements {
        let v = plan.encoded_value(params, p).abs();
        peak[p.tile] = peak[p.tile].max(v);
    }
    let span = opts.window.span();
    for (tile, m) in plan.tiles.iter_mut().zip(peak) {
        tile.scale = if m > 0.0 { span / m } else { span };
    }
    plan.check_collisions()?;
    Ok(plan)
}
