// SPDX-License-Identifier: Apache-2.0
//! Per-pass crossbar settling time.

use serde::{Deserialize, Serialize};

use super::Scenario;

/// Lumped RC settling model `τ = τ0 + κ · R_path`, where `R_path` is the
/// device resistance plus the source resistance plus the wire resistance of
/// one full row and one full column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossbarRc {
    pub tau0_us: f64,
    pub kappa_us_per_ohm: f64,
    pub r_line: f64,
    pub r_source: f64,
    pub rows: usize,
    pub cols: usize,
}

pub const R_ON: f64 = 10e3;
pub const R_OFF: f64 = 100e3;
/// Published per-pass latencies, µs.
pub const PASS_LATENCY_ALL_ON_US: f64 = 2.03e-3;
pub const PASS_LATENCY_MIDPOINT_US: f64 = 6.07e-3;

impl Scenario {
    /// Mean resistance of an active device.
    pub fn device_resistance(self) -> f64 {
        match self {
            Scenario::AllOn => R_ON,
            Scenario::Midpoint => (R_ON + R_OFF) / 2.0,
        }
    }
}

impl CrossbarRc {
    /// Fits `τ0` and `κ` so the two scenarios reproduce the published
    /// per-pass latencies at the given wire resistances.
    pub fn calibrated(r_line: f64, r_source: f64, rows: usize, cols: usize) -> Self {
        let mut rc = Self {
            tau0_us: 0.0,
            kappa_us_per_ohm: 0.0,
            r_line,
            r_source,
            rows,
            cols,
        };
        let (a, b) = (
            rc.path_resistance(Scenario::AllOn),
            rc.path_resistance(Scenario::Midpoint),
        );
        rc.kappa_us_per_ohm = (PASS_LATENCY_MIDPOINT_US - PASS_LATENCY_ALL_ON_US) / (b - a);
        rc.tau0_us = PASS_LATENCY_ALL_ON_US - rc.kappa_us_per_ohm * a;
        rc
    }

    pub fn path_resistance(&self, scenario: Scenario) -> f64 {
        scenario.device_resistance() + self.r_source + (self.rows + self.cols) as f64 * self.r_line
    }

    pub fn pass_latency_us(&self, scenario: Scenario) -> f64 {
        self.tau0_us + self.kappa_us_per_ohm * self.path_resistance(scenario)
    }
}

impl Default for CrossbarRc {
    /// Calibrated at 2 Ω line and 20 Ω source resistance on 64×64 tiles.
    fn default() -> Self {
        Self::calibrated(2.0, 20.0, 64, 64)
    }
}
