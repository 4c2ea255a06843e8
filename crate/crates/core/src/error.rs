// SPDX-License-Identifier: Apache-2.0
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("{layer}: {detail}")]
    LayerMismatch { layer: String, detail: String },

    #[error("output length would be {len} (must be at least 1)")]
    EmptyOutput { len: i64 },

    #[error("invalid quantizer range [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },

    #[error("weight {weight} needs {needed:e} S but the conductance window spans only {span:e} S")]
    WindowExceeded { weight: f64, needed: f64, span: f64 },

    #[error(
        "{what} exceeds tile: needs {rows} rows x {cols} columns, tile is {tile_rows}x{tile_cols}"
    )]
    ExceedsTile {
        what: String,
        rows: usize,
        cols: usize,
        tile_rows: usize,
        tile_cols: usize,
    },

    #[error("plan needs {needed} tiles, budget is {budget}")]
    TileBudget { needed: usize, budget: usize },

    #[error("placement collision on tile {tile} at row {row}, column {col}")]
    Collision { tile: usize, row: usize, col: usize },

    #[error("voltage {volts} V on row {row} exceeds the {v_max} V read limit")]
    VoltageBound { row: usize, volts: f64, v_max: f64 },

    #[error("target conductance {g:e} S outside window [{lo:e}, {hi:e}]")]
    TargetOutsideWindow { g: f64, lo: f64, hi: f64 },

    #[error("singular nodal system (pivot {pivot:e} at unknown {index})")]
    Singular { index: usize, pivot: f64 },

    #[error("nodal solve did not converge: residual {residual:e} > {tolerance:e}")]
    NotConverged { residual: f64, tolerance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schedule mismatch: {0}")]
    Schedule(String),

    #[error("malformed {format} file: {detail}")]
    Format {
        format: &'static str,
        detail: String,
    },

    #[error("empty evaluation set")]
    EmptyEvaluationSet,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
