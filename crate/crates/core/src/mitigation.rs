// SPDX-License-Identifier: Apache-2.0
//! Stuck weight offsetting and the inner-fault-tolerance baseline.
//!
//! Both work on target conductances before anything is written and assume
//! the stuck map is known. Offsetting touches only the free partner of a
//! pair with one stuck device, so every device is written once. The baseline
//! first initialises every free device and then sweeps them, writing twice.

use serde::{Deserialize, Serialize};

use crate::crossbar::{StuckMap, StuckState};
use crate::mapping::{ConductanceWindow, MappingPlan};
use crate::nn::NetworkParams;
use crate::{Error, Result};

/// Relative residual (of the window span) below which a pair counts as repaired.
const REPAIR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    /// Pairs with exactly one stuck device brought back onto the target.
    pub repaired: usize,
    pub unrepairable_both_stuck: usize,
    /// One device stuck, but the partner would have to leave the window.
    pub unrepairable_saturated: usize,
    /// Logical write passes over the array.
    pub write_passes: u32,
    /// `|represented − target|` per placement, in encoded weight units.
    pub residuals: Vec<f64>,
}

impl RepairReport {
    pub fn unrepairable(&self) -> usize {
        self.unrepairable_both_stuck + self.unrepairable_saturated
    }

    pub fn mean_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            0.0
        } else {
            self.residuals.iter().sum::<f64>() / self.residuals.len() as f64
        }
    }
}

/// One differential pair to be programmed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSite {
    pub tile: usize,
    pub row: usize,
    pub col_plus: usize,
    pub col_minus: usize,
    /// Encoded target value.
    pub w: f64,
    /// Siemens per unit of `w`.
    pub scale: f64,
}

fn stuck_g(s: StuckState, window: ConductanceWindow) -> Option<f64> {
    match s {
        StuckState::Free => None,
        StuckState::StuckOn => Some(window.g_on),
        StuckState::StuckOff => Some(window.g_off),
    }
}

/// What a grid of targets actually represents once stuck devices override it.
fn effective(g: f64, s: StuckState, window: ConductanceWindow) -> f64 {
    stuck_g(s, window).unwrap_or(g)
}

pub fn sites_of_plan(plan: &MappingPlan, params: &NetworkParams) -> Vec<PairSite> {
    plan.placements
        .iter()
        .map(|p| PairSite {
            tile: p.tile,
            row: p.row,
            col_plus: p.col_plus,
            col_minus: p.col_minus,
            w: plan.encoded_value(params, p),
            scale: plan.tiles[p.tile].scale,
        })
        .collect()
}

fn check_maps(grids: &[Vec<f64>], stuck: &[StuckMap], cols: usize) -> Result<()> {
    if grids.len() != stuck.len()
        || grids
            .iter()
            .zip(stuck)
            .any(|(g, s)| g.len() != s.states.len() || s.cols != cols)
    {
        return Err(Error::ShapeMismatch {
            context: "stuck maps".into(),
            expected: format!("{} tiles matching the conductance grids", grids.len()),
            actual: format!("{} maps", stuck.len()),
        });
    }
    Ok(())
}

/// `|represented − target|` per site for conductances `g` under `stuck`.
pub fn site_residuals(
    sites: &[PairSite],
    grids: &[Vec<f64>],
    stuck: &[StuckMap],
    cols: usize,
    window: ConductanceWindow,
) -> Vec<f64> {
    sites
        .iter()
        .map(|s| {
            let st = &stuck[s.tile];
            let gp = effective(
                grids[s.tile][s.row * cols + s.col_plus],
                st.get(s.row, s.col_plus),
                window,
            );
            let gm = effective(
                grids[s.tile][s.row * cols + s.col_minus],
                st.get(s.row, s.col_minus),
                window,
            );
            ((gp - gm) / s.scale - s.w).abs()
        })
        .collect()
}

/// Offsets the free partner of every half-stuck pair in place.
pub fn repair_sites(
    sites: &[PairSite],
    grids: &mut [Vec<f64>],
    stuck: &[StuckMap],
    cols: usize,
    window: ConductanceWindow,
) -> Result<RepairReport> {
    check_maps(grids, stuck, cols)?;
    let mut report = RepairReport {
        write_passes: 1,
        ..RepairReport::default()
    };
    let tol = REPAIR_TOL * window.span();
    for s in sites {
        let st = &stuck[s.tile];
        let g = &mut grids[s.tile];
        let (ip, im) = (s.row * cols + s.col_plus, s.row * cols + s.col_minus);
        let target = s.w * s.scale;
        match (
            stuck_g(st.get(s.row, s.col_plus), window),
            stuck_g(st.get(s.row, s.col_minus), window),
        ) {
            (None, None) => {}
            (Some(_), Some(_)) => report.unrepairable_both_stuck += 1,
            (Some(gp), None) => {
                g[im] = window.clamp(gp - target);
                if (gp - g[im] - target).abs() > tol {
                    report.unrepairable_saturated += 1;
                } else {
                    report.repaired += 1;
                }
            }
            (None, Some(gm)) => {
                g[ip] = window.clamp(gm + target);
                if (g[ip] - gm - target).abs() > tol {
                    report.unrepairable_saturated += 1;
                } else {
                    report.repaired += 1;
                }
            }
        }
    }
    report.residuals = site_residuals(sites, grids, stuck, cols, window);
    Ok(report)
}

/// Two-phase baseline: every free device starts at `G_off`, then each pair's
/// free devices are adjusted in turn to the closest achievable value.
pub fn inner_fault_tolerance_sites(
    sites: &[PairSite],
    rows: usize,
    cols: usize,
    stuck: &[StuckMap],
    window: ConductanceWindow,
) -> Result<(Vec<Vec<f64>>, RepairReport)> {
    let mut grids: Vec<Vec<f64>> = stuck
        .iter()
        .map(|m| {
            m.states
                .iter()
                .map(|&s| effective(window.g_off, s, window))
                .collect()
        })
        .collect();
    if grids.iter().any(|g| g.len() != rows * cols) {
        return Err(Error::ShapeMismatch {
            context: "stuck maps".into(),
            expected: format!("{rows}x{cols}"),
            actual: "other".into(),
        });
    }
    let mut report = RepairReport {
        write_passes: 2,
        ..RepairReport::default()
    };
    let tol = REPAIR_TOL * window.span();
    for s in sites {
        let st = &stuck[s.tile];
        let g = &mut grids[s.tile];
        let (ip, im) = (s.row * cols + s.col_plus, s.row * cols + s.col_minus);
        let target = s.w * s.scale;
        let free_p = st.get(s.row, s.col_plus) == StuckState::Free;
        let free_m = st.get(s.row, s.col_minus) == StuckState::Free;
        if free_p {
            g[ip] = window.clamp(g[im] + target);
        }
        if free_m {
            g[im] = window.clamp(g[ip] - target);
        }
        match (free_p, free_m) {
            (false, false) => report.unrepairable_both_stuck += 1,
            (true, true) => {}
            _ if (g[ip] - g[im] - target).abs() > tol => report.unrepairable_saturated += 1,
            _ => report.repaired += 1,
        }
    }
    report.residuals = site_residuals(sites, &grids, stuck, cols, window);
    Ok((grids, report))
}

/// Target conductances for `plan` with stuck weight offsetting applied.
pub fn offset_stuck_weights(
    plan: &MappingPlan,
    params: &NetworkParams,
    stuck: &[StuckMap],
) -> Result<(Vec<Vec<f64>>, RepairReport)> {
    let mut grids = plan.target_conductances(params)?;
    let report = repair_conductances(plan, params, stuck, &mut grids)?;
    Ok((grids, report))
}

/// In-place variant of [`offset_stuck_weights`]; applying it twice changes nothing.
pub fn repair_conductances(
    plan: &MappingPlan,
    params: &NetworkParams,
    stuck: &[StuckMap],
    grids: &mut [Vec<f64>],
) -> Result<RepairReport> {
    repair_sites(
        &sites_of_plan(plan, params),
        grids,
        stuck,
        plan.tile_cols,
        plan.window,
    )
}

pub fn inner_fault_tolerance_baseline(
    plan: &MappingPlan,
    params: &NetworkParams,
    stuck: &[StuckMap],
) -> Result<(Vec<Vec<f64>>, RepairReport)> {
    inner_fault_tolerance_sites(
        &sites_of_plan(plan, params),
        plan.tile_rows,
        plan.tile_cols,
        stuck,
        plan.window,
    )
}

/// Unmitigated mapping: plain targets with stuck devices left to override them.
pub fn unmitigated(
    plan: &MappingPlan,
    params: &NetworkParams,
    stuck: &[StuckMap],
) -> Result<(Vec<Vec<f64>>, RepairReport)> {
    let grids = plan.target_conductances(params)?;
    check_maps(&grids, stuck, plan.tile_cols)?;
    let sites = sites_of_plan(plan, params);
    let report = RepairReport {
        write_passes: 1,
        residuals: site_residuals(&sites, &grids, stuck, plan.tile_cols, plan.window),
        ..RepairReport::default()
    };
    Ok((grids, report))
}

/// A `rows × pairs` weight matrix on one tile, pair `k` of a row on columns
/// `(2k, 2k+1)`, scaled to the window. Used for weight-space studies.
pub fn matrix_sites(
    weights: &[f64],
    rows: usize,
    pairs: usize,
    window: ConductanceWindow,
) -> Vec<PairSite> {
    let peak = weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    let scale = if peak > 0.0 {
        window.span() / peak
    } else {
        window.span()
    };
    (0..rows * pairs)
        .map(|k| PairSite {
            tile: 0,
            row: k / pairs,
            col_plus: 2 * (k % pairs),
            col_minus: 2 * (k % pairs) + 1,
            w: weights[k],
            scale,
        })
        .collect()
}

/// Plain differential targets for `sites` on `tiles` grids of `rows × cols`.
pub fn site_targets(
    sites: &[PairSite],
    tiles: usize,
    rows: usize,
    cols: usize,
    window: ConductanceWindow,
) -> Result<Vec<Vec<f64>>> {
    let mut g = vec![vec![window.g_off; rows * cols]; tiles];
    for s in sites {
        let pair = crate::mapping::map_weight_to_pair(s.w, s.scale, window)?;
        g[s.tile][s.row * cols + s.col_plus] = pair.g_plus;
        g[s.tile][s.row * cols + s.col_minus] = pair.g_minus;
    }
    Ok(g)
}
