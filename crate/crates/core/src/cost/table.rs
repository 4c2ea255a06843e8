// SPDX-License-Identifier: Apache-2.0
//! Component library: per-unit area, power and latency of every block.

use serde::{Deserialize, Serialize};

use super::{CrossbarRc, Scenario, Variant};
use crate::{Error, Result};

/// How many instances exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountModel {
    Fixed(usize),
    PerTile(usize),
}

/// How many times a component is invoked in one inference. `S` is the
/// number of readout stages, `T` tiles, `R`/`C` tile rows/columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invocation {
    Fixed(usize),
    /// `S`
    PerStage,
    /// `S·C`
    PerStageColumn,
    /// `S·T`
    PerStageTile,
    /// `S·T·C`
    PerStageTileColumn,
    /// `R`
    PerRow,
    /// `R·T·C`
    PerRowTileColumn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub specification: String,
    pub count: CountModel,
    pub unit_area_mm2: f64,
    pub unit_power_mw: f64,
    pub unit_latency_us: f64,
    pub invocation: Invocation,
}

fn c(
    name: &str,
    specification: &str,
    count: CountModel,
    area: f64,
    power: f64,
    latency: f64,
    invocation: Invocation,
) -> ComponentSpec {
    ComponentSpec {
        name: name.into(),
        specification: specification.into(),
        count,
        unit_area_mm2: area,
        unit_power_mw: power,
        unit_latency_us: latency,
        invocation,
    }
}

/// Seven-tile reference values, divided down to one unit each.
pub fn component_table(variant: Variant, scenario: Scenario) -> Vec<ComponentSpec> {
    use CountModel::{Fixed, PerTile};
    use Invocation as I;
    let tdm = variant == Variant::Tdm;
    let crossbar_power = match (scenario, variant) {
        (Scenario::AllOn, Variant::Tdm) => 8.67 / 7.0,
        (Scenario::AllOn, Variant::Parallel) => 8.69 / 7.0,
        (Scenario::Midpoint, _) => 4.35 / 7.0,
    };
    let tau = CrossbarRc::default().pass_latency_us(scenario);
    vec![
        c(
            "DAC",
            "6 bits, 1.25 GHz",
            PerTile(64),
            0.0576,
            6.0,
            8.0e-4,
            if tdm {
                I::PerStageTileColumn
            } else {
                I::PerStageTile
            },
        ),
        c(
            "ADC",
            "6 bits, 10 MHz",
            PerTile(if tdm { 1 } else { 64 }),
            0.66,
            10.0,
            0.1,
            if tdm {
                I::PerStageTileColumn
            } else {
                I::PerStage
            },
        ),
        c(
            "ReLU",
            "",
            Fixed(2),
            9.6e-3 / 2.0,
            3.28e-2 / 2.0,
            9.8e-2,
            I::Fixed(1),
        ),
        c(
            "Average Pool",
            "",
            Fixed(1),
            3.83e-4,
            1.59,
            8.49e-5,
            I::Fixed(1),
        ),
        c(
            "Adder",
            "",
            Fixed(10),
            5.34e-4,
            1.74e-3,
            3.06e-4,
            I::Fixed(2),
        ),
        c(
            "Subtractor",
            "",
            PerTile(if tdm { 1 } else { 32 }),
            2.46e-4 / 7.0,
            2.87e-1 / 7.0,
            3.34e-4,
            if tdm { I::PerStageColumn } else { I::PerStage },
        ),
        c(
            "S+H",
            "",
            PerTile(64),
            8.98e-6 / 448.0,
            3.81e-3 / 448.0,
            8.33e-4,
            I::PerStage,
        ),
        c(
            "eDRAM Buffer",
            "2KB",
            Fixed(1),
            4.72e-3,
            18.1,
            1.15e-4,
            I::Fixed(2),
        ),
        c(
            "eDRAM-Tile Bus",
            "",
            Fixed(192),
            4.5e-3 / 192.0,
            3.5 / 192.0,
            9.02e-5,
            I::Fixed(1),
        ),
        c("IR", "1KB", Fixed(1), 0.81, 0.674, 8.21e-5, I::Fixed(2)),
        c("OR", "512B", Fixed(1), 8.7e-4, 0.418, 8.21e-5, I::Fixed(2)),
        c(
            "Crossbar",
            "64x64",
            PerTile(1),
            2.87e-4 / 7.0,
            crossbar_power,
            tau,
            if tdm { I::PerRowTileColumn } else { I::PerRow },
        ),
    ]
}

/// Per-metric multiplicative factors, e.g. for a technology node change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechnologyFactors {
    pub area: f64,
    pub power: f64,
    pub latency: f64,
}

impl Default for TechnologyFactors {
    fn default() -> Self {
        Self {
            area: 1.0,
            power: 1.0,
            latency: 1.0,
        }
    }
}

pub fn scale_technology(
    table: &[ComponentSpec],
    f: TechnologyFactors,
) -> Result<Vec<ComponentSpec>> {
    for (name, v) in [("area", f.area), ("power", f.power), ("latency", f.latency)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!(
                "{name} factor must be positive, got {v}"
            )));
        }
    }
    Ok(table
        .iter()
        .map(|s| ComponentSpec {
            unit_area_mm2: s.unit_area_mm2 * f.area,
            unit_power_mw: s.unit_power_mw * f.power,
            unit_latency_us: s.unit_latency_us * f.latency,
            ..s.clone()
        })
        .collect())
}
