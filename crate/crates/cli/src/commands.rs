// SPDX-License-Identifier: Apache-2.0
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rram_cnn::cost::{total_cost, Scenario, Variant};
use rram_cnn::crossbar::{NonIdealityConfig, ProgrammedNetwork};
use rram_cnn::experiment::{
    deploy_plan, evaluate_mitigation, evaluate_network, sweep as run_sweep, weight_space_study,
    DeployOptions,
};
use rram_cnn::io::{
    check_conv_tile_fit, decode_weights, load_inputs, params_from_records, save_inputs,
    save_weights, spec_from_records, SampleSet,
};
use rram_cnn::mapping::{
    compile_network, plan_conv_staggered, plan_conv_weight_stationary, plan_fc, ConvDims,
    LayerKind, MappingScheme,
};
use rram_cnn::metrics::argmax2;
use rram_cnn::nn::{NetworkParams, NetworkSpec, ParamKind};
use rram_cnn::parallel::Execution;
use rram_cnn::synthetic::separable_task;

use crate::{
    CostArgs, InferArgs, MitigateArgs, ModelArgs, PlanArgs, RunArgs, SeedArgs, SweepArgs, SynthArgs,
};

fn load_model(path: &Path, input_length: usize) -> Result<(NetworkSpec, NetworkParams)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let records = decode_weights(&bytes).with_context(|| format!("loading {}", path.display()))?;
    check_conv_tile_fit(&records)?;
    let spec = spec_from_records(&records, input_length)?;
    let params = params_from_records(&records, &spec)?;
    Ok((spec, params))
}

fn load_set(path: &Path) -> Result<SampleSet> {
    load_inputs(path).with_context(|| format!("loading {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<NonIdealityConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            NonIdealityConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(NonIdealityConfig::default()),
    }
}

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn seeds(a: &SeedArgs) -> Vec<u64> {
    (a.seed..a.seed + a.trials).collect()
}

/// Everything a run needs once files are loaded.
struct Session {
    spec: NetworkSpec,
    params: NetworkParams,
    set: SampleSet,
    calibration: SampleSet,
    cfg: NonIdealityConfig,
    opts: DeployOptions,
}

fn session(run: &RunArgs) -> Result<Session> {
    let set = load_set(&run.inputs)?;
    let calibration = match &run.calibration {
        Some(p) => load_set(p)?,
        None => set.clone(),
    };
    if calibration.length != set.length {
        bail!(
            "calibration samples have length {}, inputs {}",
            calibration.length,
            set.length
        );
    }
    let (spec, params) = load_model(&run.model.weights, set.length)?;
    let mut opts = DeployOptions::new(run.model.scheme.parse()?);
    opts.input_ranges = run.input_range.parse()?;
    opts.adc_ranges = run.adc_range.parse()?;
    out_dir(&run.out)?;
    Ok(Session {
        spec,
        params,
        set,
        calibration,
        cfg: load_config(run.config.as_deref())?,
        opts,
    })
}

#[derive(Serialize)]
struct PredictionRow {
    index: usize,
    logit0: f64,
    logit1: f64,
    predicted: u8,
    label: Option<u8>,
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let mut s = session(&a.run)?;
    if let Some(seed) = a.seed {
        s.cfg.rng_seed = seed;
    }
    let plan = deploy_plan(&s.spec, &s.params, &s.calibration.samples, &s.cfg, &s.opts)?;
    let net = ProgrammedNetwork::new(&s.spec, &plan, &s.params, &s.cfg)?;
    let logits = net.infer_batch(&s.set.samples, Execution::Parallel)?;
    let rows: Vec<PredictionRow> = logits
        .iter()
        .enumerate()
        .map(|(i, l)| PredictionRow {
            index: i,
            logit0: l[0],
            logit1: l[1],
            predicted: argmax2(l),
            label: s.set.labels.as_ref().map(|y| y[i]),
        })
        .collect();
    write_csv(&a.run.out.join("predictions.csv"), &rows)?;
    if s.set.labels.is_some() {
        let m = evaluate_network(&net, &s.set, a.hours, Execution::Parallel)?;
        write(
            &a.run.out.join("metrics.json"),
            serde_json::to_string_pretty(&m)? + "\n",
        )?;
        eprintln!("{} samples, accuracy {:.4}", m.samples, m.accuracy);
    } else {
        eprintln!("{} samples, no labels", rows.len());
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let s = session(&a.run)?;
    let rows = run_sweep(
        &s.spec,
        &s.params,
        &s.set,
        &s.calibration.samples,
        &s.cfg,
        &a.knob,
        &a.values,
        &seeds(&a.seeds),
        &s.opts,
        Execution::Parallel,
    )?;
    write_csv(&a.run.out.join("sweep.csv"), &rows)?;
    for r in &rows {
        eprintln!(
            "{} = {}: {:.4} ± {:.4}",
            r.knob, r.value, r.mean_accuracy, r.std_accuracy
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct RepairRow {
    stuck_rate: f64,
    seed: u64,
    mitigated: bool,
    repaired: usize,
    unrepairable_both_stuck: usize,
    unrepairable_saturated: usize,
    write_passes: u32,
    mean_residual: f64,
}

pub fn mitigate(a: &MitigateArgs) -> Result<()> {
    let s = session(&a.run)?;
    let seeds = seeds(&a.seeds);
    let plan = deploy_plan(&s.spec, &s.params, &s.calibration.samples, &s.cfg, &s.opts)?;
    let rows = evaluate_mitigation(
        &s.spec,
        &s.params,
        &s.set,
        &plan,
        &s.cfg,
        &a.rates,
        &seeds,
        Execution::Parallel,
    )?;
    write_csv(&a.run.out.join("mitigation.csv"), &rows)?;
    let reports: Vec<RepairRow> = rows
        .iter()
        .map(|r| RepairRow {
            stuck_rate: r.stuck_rate,
            seed: r.seed,
            mitigated: r.mitigated,
            repaired: r.report.repaired,
            unrepairable_both_stuck: r.report.unrepairable_both_stuck,
            unrepairable_saturated: r.report.unrepairable_saturated,
            write_passes: r.report.write_passes,
            mean_residual: r.report.mean_residual(),
        })
        .collect();
    write(
        &a.run.out.join("repair.json"),
        serde_json::to_string_pretty(&reports)? + "\n",
    )?;
    for pair in rows.chunks(2) {
        eprintln!(
            "rate {} seed {}: accuracy {:.4} -> {:.4}",
            pair[0].stuck_rate, pair[0].seed, pair[0].accuracy, pair[1].accuracy
        );
    }
    if a.matrix_trials > 0 {
        let mut all = Vec::new();
        for &rate in &a.rates {
            let trials = weight_space_study(
                a.seeds.seed,
                a.matrix_trials,
                rate,
                plan.tile_rows,
                plan.tile_cols,
                Execution::Parallel,
            )?;
            let wins = trials
                .iter()
                .filter(|t| t.mitigated_error < t.unmitigated_error)
                .count();
            eprintln!(
                "rate {rate}: offsetting lowers weight error in {wins}/{} random matrices",
                trials.len()
            );
            all.extend(trials.into_iter().map(|t| (rate, t)));
        }
        #[derive(Serialize)]
        struct Row {
            stuck_rate: f64,
            trial: u64,
            stuck_devices: usize,
            unmitigated_error: f64,
            mitigated_error: f64,
            baseline_error: f64,
        }
        let rows: Vec<Row> = all
            .into_iter()
            .map(|(stuck_rate, t)| Row {
                stuck_rate,
                trial: t.trial,
                stuck_devices: t.stuck_devices,
                unmitigated_error: t.unmitigated_error,
                mitigated_error: t.mitigated_error,
                baseline_error: t.baseline_error,
            })
            .collect();
        write_csv(&a.run.out.join("weight_space.csv"), &rows)?;
    }
    Ok(())
}

pub fn cost(a: &CostArgs) -> Result<()> {
    let scheme: MappingScheme = a.scheme.parse()?;
    let (spec, params) = match &a.weights {
        Some(w) => load_model(w, a.input_length)?,
        None => {
            let spec = NetworkSpec::canonical();
            let params = NetworkParams::zeros(&spec);
            (spec, params)
        }
    };
    let plan = compile_network(&spec, &params, scheme)?;
    let variant: Variant = a.variant.parse()?;
    let scenario: Scenario = a.scenario.parse()?;
    let report = total_cost(&plan, variant, scenario)?;
    out_dir(&a.out)?;
    write(&a.out.join("cost.json"), report.to_json()? + "\n")?;
    write(&a.out.join("cost.txt"), report.to_text())?;
    eprintln!(
        "{variant:?}/{scenario:?}: {:.2} mm2, {:.0} mW, {:.4} us, {:.4} uJ",
        report.area_mm2, report.power_mw, report.latency_us, report.energy_uj
    );
    Ok(())
}

fn ratio_cell(a: usize, b: usize) -> String {
    if a == b {
        "None".into()
    } else {
        format!("{:.0}x", a as f64 / b as f64)
    }
}

fn group(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Both schemes side by side per layer, in unpadded layer dimensions.
fn budget_table(spec: &NetworkSpec) -> Result<String> {
    let mut s = String::new();
    writeln!(
        s,
        "{:<8} {:>10} {:>10} {:>8} {:>8} {:>12} {:>12} {:>8} {:>8}",
        "Layer", "a cells", "b cells", "area", "compute", "a sparse", "b sparse", "area", "compute"
    )?;
    for layer in spec.param_layers() {
        let (a, b) = match layer.kind {
            ParamKind::Conv(c) => {
                let mut d = ConvDims::from_spec(&c, layer.input_len);
                d.pad_left = 0;
                d.pad_right = 0;
                (
                    plan_conv_staggered(&d)?.budget,
                    plan_conv_weight_stationary(&d)?.budget,
                )
            }
            ParamKind::Fc(f) => {
                let b = plan_fc(f.in_features, f.out_features, true)?.budget;
                (b, b)
            }
        };
        writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>8} {:>8} {:>12} {:>12} {:>8} {:>8}",
            layer.name,
            group(a.cells_used),
            group(b.cells_used),
            ratio_cell(a.cells_used, b.cells_used),
            ratio_cell(b.pass_count, a.pass_count),
            group(a.cells_used_incl_sparsity),
            group(b.cells_used_incl_sparsity),
            ratio_cell(a.cells_used_incl_sparsity, b.cells_used_incl_sparsity),
            ratio_cell(b.pass_count, a.pass_count),
        )?;
    }
    Ok(s)
}

pub fn plan(a: &PlanArgs) -> Result<()> {
    let ModelArgs { weights, scheme } = &a.model;
    let (spec, params) = load_model(weights, a.input_length)?;
    let plan = compile_network(&spec, &params, scheme.parse()?)?;
    out_dir(&a.out)?;
    write(&a.out.join("plan.json"), plan.to_json()? + "\n")?;
    let mut table = budget_table(&spec)?;
    let total = plan.total_budget();
    writeln!(
        table,
        "\ncompiled ({scheme}): {} tiles, {} cells, {} passes",
        plan.tiles.len(),
        group(total.cells_used),
        total.pass_count
    )?;
    for l in &plan.layers {
        let kind = match l.kind {
            LayerKind::Conv(_) => "conv",
            LayerKind::Fc(_) => "fc",
        };
        writeln!(
            table,
            "  {:<8} {:<4} {:>8} cells {:>4} passes",
            l.name,
            kind,
            group(l.budget.cells_used),
            l.budget.pass_count
        )?;
    }
    write(&a.out.join("budget.txt"), &table)?;
    eprint!("{table}");
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = NetworkSpec::canonical();
    let task = separable_task(&spec, a.samples, a.seed)?;
    out_dir(&a.out)?;
    save_weights(&a.out.join("weights.mxw"), &task.params)?;
    save_inputs(&a.out.join("inputs.mxi"), &task.set)?;
    eprintln!(
        "{} samples, smallest logit margin {:.4}",
        a.samples, task.margin
    );
    Ok(())
}
