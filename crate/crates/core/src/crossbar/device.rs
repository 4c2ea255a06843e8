// SPDX-License-Identifier: Apache-2.0
//! Devices, stuck maps and tile programming.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::NonIdealityConfig;
use crate::mapping::ConductanceWindow;
use crate::nn::Quantizer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StuckState {
    #[default]
    Free,
    StuckOn,
    StuckOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub g: f64,
    pub stuck: StuckState,
}

/// Which devices of one tile are stuck, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StuckMap {
    pub rows: usize,
    pub cols: usize,
    pub states: Vec<StuckState>,
}

impl StuckMap {
    pub fn free(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            states: vec![StuckState::Free; rows * cols],
        }
    }

    /// Independent per-device draw: stuck-on with `p_on`, stuck-off with `p_off`.
    pub fn sample<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        p_on: f64,
        p_off: f64,
        rng: &mut R,
    ) -> Self {
        let states = (0..rows * cols)
            .map(|_| {
                let u: f64 = rng.random();
                if u < p_on {
                    StuckState::StuckOn
                } else if u < p_on + p_off {
                    StuckState::StuckOff
                } else {
                    StuckState::Free
                }
            })
            .collect();
        Self { rows, cols, states }
    }

    pub fn get(&self, row: usize, col: usize) -> StuckState {
        self.states[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, s: StuckState) {
        self.states[row * self.cols + col] = s;
    }

    pub fn count(&self, s: StuckState) -> usize {
        self.states.iter().filter(|&&x| x == s).count()
    }
}

/// A programmed `rows × cols` array. `window` is the physical window after
/// range variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarTile {
    pub rows: usize,
    pub cols: usize,
    pub window: ConductanceWindow,
    pub devices: Vec<DeviceState>,
}

impl CrossbarTile {
    /// Tile with the given conductances and no stuck devices.
    pub fn from_conductances(
        rows: usize,
        cols: usize,
        window: ConductanceWindow,
        g: &[f64],
    ) -> Result<Self> {
        if g.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "tile conductances".into(),
                expected: format!("{}", rows * cols),
                actual: format!("{}", g.len()),
            });
        }
        if let Some(&bad) = g.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::TargetOutsideWindow {
                g: bad,
                lo: window.g_off,
                hi: window.g_on,
            });
        }
        Ok(Self {
            rows,
            cols,
            window,
            devices: g
                .iter()
                .map(|&g| DeviceState {
                    g,
                    stuck: StuckState::Free,
                })
                .collect(),
        })
    }

    pub fn g(&self, row: usize, col: usize) -> f64 {
        self.devices[row * self.cols + col].g
    }

    pub fn conductances(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.g).collect()
    }

    pub fn stuck_map(&self) -> StuckMap {
        StuckMap {
            rows: self.rows,
            cols: self.cols,
            states: self.devices.iter().map(|d| d.stuck).collect(),
        }
    }
}

/// Writes `targets` (row-major, inside `window`) onto a tile.
///
/// Per device: scale by `g_window_scale`, round to `write_bits` levels over
/// the scaled window, multiply by `1 + N(0, write_sigma)`, clamp, then apply
/// the stuck map. One normal draw is consumed per device whatever its state,
/// so the write noise of a device does not depend on the stuck map.
pub fn program_tile<R: Rng + ?Sized>(
    targets: &[f64],
    rows: usize,
    cols: usize,
    window: ConductanceWindow,
    stuck: &StuckMap,
    cfg: &NonIdealityConfig,
    rng: &mut R,
) -> Result<CrossbarTile> {
    if targets.len() != rows * cols || stuck.states.len() != rows * cols {
        return Err(Error::ShapeMismatch {
            context: "tile programming".into(),
            expected: format!("{} targets and stuck states", rows * cols),
            actual: format!("{} / {}", targets.len(), stuck.states.len()),
        });
    }
    let tol = window.span() * 1e-12;
    let actual = window.scaled(cfg.g_window_scale);
    let quant = cfg
        .write_bits
        .map(|b| Quantizer::new(b, actual.g_off, actual.g_on))
        .transpose()?;
    let mut devices = Vec::with_capacity(targets.len());
    for (&t, &s) in targets.iter().zip(&stuck.states) {
        if !(t >= window.g_off - tol && t <= window.g_on + tol) {
            return Err(Error::TargetOutsideWindow {
                g: t,
                lo: window.g_off,
                hi: window.g_on,
            });
        }
        let mut g = actual.clamp(t * cfg.g_window_scale);
        if let Some(q) = &quant {
            g = q.quantize(g);
        }
        let z: f64 = StandardNormal.sample(rng);
        if cfg.write_sigma > 0.0 {
            g = actual.clamp(g * (1.0 + cfg.write_sigma * z));
        }
        g = match s {
            StuckState::Free => g,
            StuckState::StuckOn => actual.g_on,
            StuckState::StuckOff => actual.g_off,
        };
        devices.push(DeviceState { g, stuck: s });
    }
    Ok(CrossbarTile {
        rows,
        cols,
        window: actual,
        devices,
    })
}
