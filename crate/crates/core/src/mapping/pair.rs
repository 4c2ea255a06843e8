// SPDX-License-Identifier: Apache-2.0
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Programmable conductance range `[g_off, g_on]` in siemens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductanceWindow {
    pub g_off: f64,
    pub g_on: f64,
}

impl ConductanceWindow {
    pub fn from_resistances(r_on: f64, r_off: f64) -> Self {
        Self {
            g_off: 1.0 / r_off,
            g_on: 1.0 / r_on,
        }
    }

    pub fn span(&self) -> f64 {
        self.g_on - self.g_off
    }

    pub fn clamp(&self, g: f64) -> f64 {
        g.clamp(self.g_off, self.g_on)
    }

    pub fn contains(&self, g: f64) -> bool {
        g >= self.g_off && g <= self.g_on
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            g_off: self.g_off * factor,
            g_on: self.g_on * factor,
        }
    }
}

impl Default for ConductanceWindow {
    /// 10 kΩ on, 100 kΩ off.
    fn default() -> Self {
        Self::from_resistances(10e3, 100e3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferentialPair {
    pub g_plus: f64,
    pub g_minus: f64,
}

impl DifferentialPair {
    pub fn weight(&self, scale: f64) -> f64 {
        (self.g_plus - self.g_minus) / scale
    }
}

/// One-sided differential encoding: the column of the opposite sign rests at `g_off`.
pub fn map_weight_to_pair(
    w: f64,
    scale: f64,
    window: ConductanceWindow,
) -> Result<DifferentialPair> {
    let needed = w.abs() * scale;
    // per-tile scales are max-normalised, so allow for the last-ulp overshoot
    if !needed.is_finite() || needed > window.span() * (1.0 + 1e-12) {
        return Err(Error::WindowExceeded {
            weight: w,
            needed,
            span: window.span(),
        });
    }
    let g = (window.g_off + needed).min(window.g_on);
    Ok(if w >= 0.0 {
        DifferentialPair {
            g_plus: g,
            g_minus: window.g_off,
        }
    } else {
        DifferentialPair {
            g_plus: window.g_off,
            g_minus: g,
        }
    })
}
