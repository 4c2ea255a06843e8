// SPDX-License-Identifier: Apache-2.0
//! Area, power, latency and energy of the accelerator.
//!
//! Area and power depend only on how many tiles the plan uses. Latency is
//! the sum over components of `invocations × unit latency`, where the
//! invocation counts come from the readout schedule of the plan.

mod latency;
mod table;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use latency::{CrossbarRc, PASS_LATENCY_ALL_ON_US, PASS_LATENCY_MIDPOINT_US, R_OFF, R_ON};
pub use table::{
    component_table, scale_technology, ComponentSpec, CountModel, Invocation, TechnologyFactors,
};

use crate::mapping::{LayerKind, MappingPlan};
use crate::{Error, Result};

/// ADC sharing per tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One ADC per tile, columns time-multiplexed through a sample-and-hold.
    Tdm,
    /// One ADC per column.
    Parallel,
}

/// Mean resistance assumed for active devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    AllOn,
    Midpoint,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tdm" => Ok(Self::Tdm),
            "parallel" | "parallelized" => Ok(Self::Parallel),
            o => Err(Error::Config(format!("unknown variant {o:?}"))),
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" | "all_on" => Ok(Self::AllOn),
            "mid" | "midpoint" => Ok(Self::Midpoint),
            o => Err(Error::Config(format!("unknown scenario {o:?}"))),
        }
    }
}

/// How a convolution contributes readout stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvStageAccounting {
    /// One readout per convolution layer.
    #[default]
    SingleReadout,
    /// One readout per output position (every window pass).
    PerWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSchedule {
    pub accounting: ConvStageAccounting,
    /// Readout stages per layer.
    pub layer_readouts: Vec<(String, usize)>,
    /// Readout stages per pipeline stage (maximum over its concurrent layers).
    pub stage_readouts: Vec<usize>,
    /// `S`: total readout stages.
    pub stages: usize,
    pub tiles: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ExecutionSchedule {
    pub fn from_plan(plan: &MappingPlan, accounting: ConvStageAccounting) -> Result<Self> {
        let mut by_stage: BTreeMap<usize, usize> = BTreeMap::new();
        let mut layer_readouts = Vec::new();
        for (li, l) in plan.layers.iter().enumerate() {
            if plan.passes_for(li).next().is_none() {
                return Err(Error::Schedule(format!("layer {} has no passes", l.name)));
            }
            let n = match (l.kind, accounting) {
                (LayerKind::Conv(_), ConvStageAccounting::SingleReadout) => 1,
                _ => l.budget.pass_count,
            };
            layer_readouts.push((l.name.clone(), n));
            let e = by_stage.entry(l.stage).or_default();
            *e = (*e).max(n);
        }
        let stage_readouts: Vec<usize> = by_stage.into_values().collect();
        Ok(Self {
            accounting,
            layer_readouts,
            stages: stage_readouts.iter().sum(),
            stage_readouts,
            tiles: plan.tiles.len(),
            rows: plan.tile_rows,
            cols: plan.tile_cols,
        })
    }

    pub fn count(&self, m: CountModel) -> usize {
        match m {
            CountModel::Fixed(n) => n,
            CountModel::PerTile(n) => n * self.tiles,
        }
    }

    pub fn invocations(&self, inv: Invocation) -> usize {
        let (s, t, r, c) = (self.stages, self.tiles, self.rows, self.cols);
        match inv {
            Invocation::Fixed(n) => n,
            Invocation::PerStage => s,
            Invocation::PerStageColumn => s * c,
            Invocation::PerStageTile => s * t,
            Invocation::PerStageTileColumn => s * t * c,
            Invocation::PerRow => r,
            Invocation::PerRowTileColumn => r * t * c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub name: String,
    pub specification: String,
    pub count: usize,
    pub area_mm2: f64,
    pub power_mw: f64,
    pub unit_latency_us: f64,
    pub invocations: usize,
    pub total_latency_us: f64,
    /// `power × total latency`.
    pub energy_uj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub variant: Variant,
    pub scenario: Scenario,
    pub schedule: ExecutionSchedule,
    pub rows: Vec<CostRow>,
    pub area_mm2: f64,
    /// Worst case: every component active at once.
    pub power_mw: f64,
    pub latency_us: f64,
    /// Worst-case power held for the whole inference latency.
    pub energy_uj: f64,
    /// Sum of per-component energies (each active only while invoked).
    pub active_energy_uj: f64,
    /// `active_energy / latency`.
    pub average_power_mw: f64,
}

pub fn total_cost(plan: &MappingPlan, variant: Variant, scenario: Scenario) -> Result<CostReport> {
    let schedule = ExecutionSchedule::from_plan(plan, ConvStageAccounting::default())?;
    Ok(cost_report(
        &component_table(variant, scenario),
        &schedule,
        variant,
        scenario,
    ))
}

pub fn cost_report(
    table: &[ComponentSpec],
    schedule: &ExecutionSchedule,
    variant: Variant,
    scenario: Scenario,
) -> CostReport {
    let rows: Vec<CostRow> = table
        .iter()
        .map(|s| {
            let count = schedule.count(s.count);
            let invocations = schedule.invocations(s.invocation);
            let power = count as f64 * s.unit_power_mw;
            let total_latency = invocations as f64 * s.unit_latency_us;
            CostRow {
                name: s.name.clone(),
                specification: s.specification.clone(),
                count,
                area_mm2: count as f64 * s.unit_area_mm2,
                power_mw: power,
                unit_latency_us: s.unit_latency_us,
                invocations,
                total_latency_us: total_latency,
                energy_uj: power * total_latency * 1e-3,
            }
        })
        .collect();
    let area: f64 = rows.iter().map(|r| r.area_mm2).sum();
    let power: f64 = rows.iter().map(|r| r.power_mw).sum();
    let latency: f64 = rows.iter().map(|r| r.total_latency_us).sum();
    let active: f64 = rows.iter().map(|r| r.energy_uj).sum();
    CostReport {
        variant,
        scenario,
        schedule: schedule.clone(),
        rows,
        area_mm2: area,
        power_mw: power,
        latency_us: latency,
        energy_uj: power * latency * 1e-3,
        active_energy_uj: active,
        average_power_mw: if latency > 0.0 {
            active / latency * 1e3
        } else {
            0.0
        },
    }
}

impl CostReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table, one row per component plus totals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>10} {:>10} {:>10} {:>8} {:>12} {:>10}",
            "Component",
            "Count",
            "Area(mm2)",
            "Power(mW)",
            "Lat(us)",
            "Calls",
            "TotLat(us)",
            "E(uJ)"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>10.3E} {:>10.3E} {:>10.3E} {:>8} {:>12.3E} {:>10.3E}",
                r.name,
                r.count,
                r.area_mm2,
                r.power_mw,
                r.unit_latency_us,
                r.invocations,
                r.total_latency_us,
                r.energy_uj
            );
        }
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>10.3E} {:>10.3E} {:>10} {:>8} {:>12.3E} {:>10.3E}",
            "Total", "", self.area_mm2, self.power_mw, "", "", self.latency_us, self.energy_uj
        );
        let _ = writeln!(
            s,
            "stages={} tiles={} active_energy_uJ={:.3E} average_power_mW={:.3E}",
            self.schedule.stages, self.schedule.tiles, self.active_energy_uj, self.average_power_mw
        );
        s
    }
}
