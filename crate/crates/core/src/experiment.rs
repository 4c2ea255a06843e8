// SPDX-License-Identifier: Apache-2.0
//! Seeded sweeps and mitigation studies.
//!
//! A study has two stages. [`deploy_plan`] fixes everything a chip designer
//! would fix: the compiled layout, per-layer DAC input ranges and ADC full
//! scales. Then every seed programs its own chip from that plan, with its own
//! stuck map and write noise, and is evaluated on a labelled set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crossbar::{
    sample_stuck_maps, NonIdealityConfig, ProgrammedNetwork, StuckMap, StuckState,
};
use crate::io::SampleSet;
use crate::mapping::{
    compile_network_with, input_ranges_bound, input_ranges_calibrated, CompileOptions,
    ConductanceWindow, MappingPlan, MappingScheme,
};
use crate::metrics::{evaluate, Metrics};
use crate::mitigation::{
    inner_fault_tolerance_sites, matrix_sites, offset_stuck_weights, repair_sites, site_residuals,
    site_targets, unmitigated, RepairReport,
};
use crate::nn::{NetworkParams, NetworkSpec, Signal};
use crate::parallel::Execution;
use crate::seed::{child_rng, Stream};
use crate::{Error, Result};

/// Seeds used when none are given.
pub const DEFAULT_SEEDS: [u64; 5] = [5, 6, 7, 8, 9];

/// How a per-layer converter range is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    /// Analytic worst case: interval bounds for DAC inputs, a fully
    /// conducting tile for the ADC.
    WorstCase,
    /// Largest value seen on the calibration set.
    #[default]
    Calibrated,
}

impl std::str::FromStr for RangeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst" | "worst-case" => Ok(Self::WorstCase),
            "calibrated" | "cal" => Ok(Self::Calibrated),
            other => Err(Error::Config(format!("unknown range mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeployOptions {
    pub scheme: MappingScheme,
    pub input_ranges: RangeMode,
    pub adc_ranges: RangeMode,
    /// Headroom multiplied onto calibrated ranges.
    pub margin: f64,
}

impl DeployOptions {
    pub fn new(scheme: MappingScheme) -> Self {
        Self {
            scheme,
            input_ranges: RangeMode::Calibrated,
            adc_ranges: RangeMode::Calibrated,
            margin: 1.0,
        }
    }
}

impl Default for DeployOptions {
    fn default() -> Self {
        Self::new(MappingScheme::WeightStationary)
    }
}

/// `cfg` without programming randomness or window variation: the chip the
/// designer calibrates against.
pub fn nominal_config(cfg: &NonIdealityConfig) -> NonIdealityConfig {
    NonIdealityConfig {
        write_bits: None,
        write_sigma: 0.0,
        p_stuck_on: 0.0,
        p_stuck_off: 0.0,
        g_window_scale: 1.0,
        ..cfg.clone()
    }
}

/// Compiles `params` and fixes converter ranges for the converters in `cfg`.
pub fn deploy_plan(
    spec: &NetworkSpec,
    params: &NetworkParams,
    calibration: &[Signal],
    cfg: &NonIdealityConfig,
    opts: &DeployOptions,
) -> Result<MappingPlan> {
    let needs_data =
        opts.input_ranges == RangeMode::Calibrated || opts.adc_ranges == RangeMode::Calibrated;
    if needs_data && calibration.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mut copts = CompileOptions::new(opts.scheme);
    copts.layer_input_ranges = Some(match opts.input_ranges {
        RangeMode::WorstCase => input_ranges_bound(spec, params, copts.input_full_scale)?,
        RangeMode::Calibrated => input_ranges_calibrated(spec, params, calibration, opts.margin)?,
    });
    let mut plan = compile_network_with(spec, params, &copts)?;
    if opts.adc_ranges == RangeMode::Calibrated && cfg.adc_bits.is_some() {
        let mut net = ProgrammedNetwork::new(spec, &plan, params, &nominal_config(cfg))?;
        net.calibrate_adc(calibration, opts.margin)?;
        plan = net.plan;
    }
    Ok(plan)
}

fn labels_of(set: &SampleSet) -> Result<&[u8]> {
    if set.samples.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    set.labels
        .as_deref()
        .ok_or_else(|| Error::Config("evaluation set has no labels".into()))
}

/// Metrics of one programmed chip on a labelled set.
pub fn evaluate_network(
    net: &ProgrammedNetwork,
    set: &SampleSet,
    hours: Option<f64>,
    exec: Execution,
) -> Result<Metrics> {
    let labels = labels_of(set)?;
    let logits = net.infer_batch(&set.samples, exec)?;
    evaluate(&logits, labels, hours)
}

/// Mean absolute difference between the parameters a chip represents and
/// the intended ones, over every weight and bias.
pub fn mean_weight_error(net: &ProgrammedNetwork, params: &NetworkParams) -> Result<f64> {
    let got = net.represented_params()?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (a, b) in got.layers.iter().zip(&params.layers) {
        for (x, y) in a
            .weights
            .iter()
            .chain(&a.bias)
            .zip(b.weights.iter().chain(&b.bias))
        {
            sum += (x - y).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub knob: String,
    pub value: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub seeds: usize,
}

/// Accuracy on `set` of every `(value, seed)` pair, one row per value in the
/// order given. The plan is redeployed per value against that value's
/// nominal chip, with ranges fixed on `calibration`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    spec: &NetworkSpec,
    params: &NetworkParams,
    set: &SampleSet,
    calibration: &[Signal],
    base: &NonIdealityConfig,
    knob: &str,
    values: &[f64],
    seeds: &[u64],
    opts: &DeployOptions,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    labels_of(set)?;
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let cfgs = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            c.set_knob(knob, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let plans = exec.try_map(&cfgs, |c| deploy_plan(spec, params, calibration, c, opts))?;
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let acc = exec.try_map(&jobs, |&(v, seed)| {
        let cfg = NonIdealityConfig {
            rng_seed: seed,
            ..cfgs[v].clone()
        };
        let net = ProgrammedNetwork::new(spec, &plans[v], params, &cfg)?;
        evaluate_network(&net, set, None, Execution::Sequential).map(|m| m.accuracy)
    })?;
    Ok(values
        .iter()
        .zip(acc.chunks(seeds.len()))
        .map(|(&value, a)| {
            let (mean_accuracy, std_accuracy) = mean_std(a);
            SweepRow {
                knob: knob.to_string(),
                value,
                mean_accuracy,
                std_accuracy,
                seeds: a.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationRow {
    pub stuck_rate: f64,
    pub seed: u64,
    pub mitigated: bool,
    pub accuracy: f64,
    pub mean_weight_error: f64,
    #[serde(skip)]
    pub report: RepairReport,
}

/// Programs each `(rate, seed)` chip with and without stuck weight
/// offsetting, against the same stuck map. Rows are ordered by rate, seed,
/// then unmitigated before mitigated.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_mitigation(
    spec: &NetworkSpec,
    params: &NetworkParams,
    set: &SampleSet,
    plan: &MappingPlan,
    base: &NonIdealityConfig,
    rates: &[f64],
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<MitigationRow>> {
    labels_of(set)?;
    let jobs: Vec<(f64, u64, bool)> = rates
        .iter()
        .flat_map(|&r| {
            seeds
                .iter()
                .flat_map(move |&s| [(r, s, false), (r, s, true)])
        })
        .collect();
    exec.try_map(&jobs, |&(rate, seed, mitigated)| {
        let mut cfg = NonIdealityConfig {
            rng_seed: seed,
            ..base.clone()
        };
        cfg.set_knob("stuck_rate", rate)?;
        cfg.validate()?;
        let stuck = sample_stuck_maps(plan, &cfg);
        let (targets, report) = if mitigated {
            offset_stuck_weights(plan, params, &stuck)?
        } else {
            unmitigated(plan, params, &stuck)?
        };
        let net = ProgrammedNetwork::from_targets(spec, plan, &targets, &stuck, &cfg)?;
        Ok(MitigationRow {
            stuck_rate: rate,
            seed,
            mitigated,
            accuracy: evaluate_network(&net, set, None, Execution::Sequential)?.accuracy,
            mean_weight_error: mean_weight_error(&net, params)?,
            report,
        })
    })
}

/// One Monte Carlo trial on a random weight matrix filling one tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpaceTrial {
    pub trial: u64,
    pub stuck_devices: usize,
    pub unmitigated_error: f64,
    pub mitigated_error: f64,
    pub baseline_error: f64,
    /// No placement got further from its target through offsetting.
    pub never_worse: bool,
    /// Offsetting and the baseline agree on every placement.
    pub baseline_agrees: bool,
    pub mitigated_write_passes: u32,
    pub baseline_write_passes: u32,
}

/// Random `rows × (cols/2)` weights in `[-1, 1]` and a stuck map with
/// `stuck_rate` split evenly between stuck-on and stuck-off, from `(seed, trial)`.
pub fn weight_space_trial(
    seed: u64,
    trial: u64,
    stuck_rate: f64,
    rows: usize,
    cols: usize,
) -> Result<WeightSpaceTrial> {
    let window = ConductanceWindow::default();
    let pairs = cols / 2;
    let mut rng = child_rng(seed, Stream::Trial, trial);
    let w: Vec<f64> = (0..rows * pairs)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let stuck = vec![StuckMap::sample(
        rows,
        cols,
        stuck_rate / 2.0,
        stuck_rate / 2.0,
        &mut rng,
    )];
    let sites = matrix_sites(&w, rows, pairs, window);
    let plain = site_targets(&sites, 1, rows, cols, window)?;
    let before = site_residuals(&sites, &plain, &stuck, cols, window);
    let mut fixed = plain.clone();
    let rep = repair_sites(&sites, &mut fixed, &stuck, cols, window)?;
    let (_, base) = inner_fault_tolerance_sites(&sites, rows, cols, &stuck, window)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let tol = 1e-12 * sites.first().map_or(1.0, |s| window.span() / s.scale);
    Ok(WeightSpaceTrial {
        trial,
        stuck_devices: stuck[0].count(StuckState::StuckOn) + stuck[0].count(StuckState::StuckOff),
        unmitigated_error: mean(&before),
        mitigated_error: rep.mean_residual(),
        baseline_error: base.mean_residual(),
        never_worse: rep
            .residuals
            .iter()
            .zip(&before)
            .all(|(a, b)| *a <= b + tol),
        baseline_agrees: rep
            .residuals
            .iter()
            .zip(&base.residuals)
            .all(|(a, b)| (a - b).abs() <= tol),
        mitigated_write_passes: rep.write_passes,
        baseline_write_passes: base.write_passes,
    })
}

pub fn weight_space_study(
    seed: u64,
    trials: u64,
    stuck_rate: f64,
    rows: usize,
    cols: usize,
    exec: Execution,
) -> Result<Vec<WeightSpaceTrial>> {
    let ids: Vec<u64> = (0..trials).collect();
    exec.try_map(&ids, |&t| {
        weight_space_trial(seed, t, stuck_rate, rows, cols)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::separable_task;

    fn fast() -> NonIdealityConfig {
        NonIdealityConfig {
            r_line: 0.0,
            r_source: 0.0,
            ..NonIdealityConfig::default()
        }
    }

    #[test]
    fn deployed_plan_keeps_synthetic_accuracy() {
        let spec = NetworkSpec::canonical();
        let task = separable_task(&spec, 40, 5).unwrap();
        let cfg = fast();
        let plan = deploy_plan(
            &spec,
            &task.params,
            &task.set.samples,
            &cfg,
            &DeployOptions::default(),
        )
        .unwrap();
        assert!(plan.layers.iter().all(|l| l.adc_full_scale.is_some()));
        let net = ProgrammedNetwork::new(&spec, &plan, &task.params, &cfg).unwrap();
        let m = evaluate_network(&net, &task.set, None, Execution::Parallel).unwrap();
        assert!(m.accuracy >= 0.95, "{}", m.accuracy);
    }

    #[test]
    fn sweep_rows_follow_values_and_are_deterministic() {
        let spec = NetworkSpec::canonical();
        let task = separable_task(&spec, 20, 6).unwrap();
        let opts = DeployOptions::default();
        let run = |exec| {
            sweep(
                &spec,
                &task.params,
                &task.set,
                &task.set.samples,
                &fast(),
                "stuck_rate",
                &[0.0, 0.1],
                &[5, 6],
                &opts,
                exec,
            )
            .unwrap()
        };
        let a = run(Execution::Parallel);
        let b = run(Execution::Sequential);
        assert_eq!(a, b);
        assert_eq!(
            a.iter().map(|r| r.value).collect::<Vec<_>>(),
            vec![0.0, 0.1]
        );
        // nothing random at rate 0 with no write noise
        assert_eq!(a[0].std_accuracy, 0.0);
        assert!(sweep(
            &spec,
            &task.params,
            &task.set,
            &task.set.samples,
            &fast(),
            "nope",
            &[1.0],
            &[5],
            &opts,
            Execution::Sequential
        )
        .is_err());
    }

    #[test]
    fn zero_rate_mitigation_is_identical() {
        let spec = NetworkSpec::canonical();
        let task = separable_task(&spec, 20, 7).unwrap();
        let plan = deploy_plan(
            &spec,
            &task.params,
            &task.set.samples,
            &fast(),
            &DeployOptions::default(),
        )
        .unwrap();
        let rows = evaluate_mitigation(
            &spec,
            &task.params,
            &task.set,
            &plan,
            &fast(),
            &[0.0],
            &[5],
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].accuracy, rows[1].accuracy);
        assert_eq!(rows[0].mean_weight_error, rows[1].mean_weight_error);
    }

    #[test]
    fn empty_set_is_an_error() {
        let spec = NetworkSpec::canonical();
        let task = separable_task(&spec, 20, 7).unwrap();
        let plan = deploy_plan(
            &spec,
            &task.params,
            &task.set.samples,
            &fast(),
            &DeployOptions::default(),
        )
        .unwrap();
        let empty = SampleSet {
            length: 64,
            samples: vec![],
            labels: Some(vec![]),
        };
        assert!(matches!(
            evaluate_mitigation(
                &spec,
                &task.params,
                &empty,
                &plan,
                &fast(),
                &[0.05],
                &[5],
                Execution::Sequential
            ),
            Err(Error::EmptyEvaluationSet)
        ));
    }

    #[test]
    fn weight_space_trial_properties() {
        let t = weight_space_trial(1, 0, 0.05, 64, 64).unwrap();
        assert!(t.stuck_devices > 0);
        assert!(t.mitigated_error < t.unmitigated_error);
        assert!(t.never_worse && t.baseline_agrees);
        assert_eq!((t.mitigated_write_passes, t.baseline_write_passes), (1, 2));
        assert_eq!(weight_space_trial(1, 0, 0.05, 64, 64).unwrap(), t);
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }
}
