// SPDX-License-Identifier: Apache-2.0
use rram_cnn::crossbar::{DriveMode, NodalSolver, NonIdealityConfig, ProgrammedNetwork};
use rram_cnn::experiment::{deploy_plan, sweep, DeployOptions, DEFAULT_SEEDS};
use rram_cnn::io::{load_inputs, load_weights, save_inputs, save_weights};
use rram_cnn::mapping::{compile_network, MappingScheme, RowDrive};
use rram_cnn::nn::{forward, NetworkSpec};
use rram_cnn::parallel::Execution;
use rram_cnn::synthetic::separable_task;

#[test]
fn files_to_crossbar_and_back() {
    let spec = NetworkSpec::canonical();
    let task = separable_task(&spec, 10, 3).unwrap();
    let dir = tempdir();
    let (w, x) = (dir.join("w.mxw"), dir.join("x.mxi"));
    save_weights(&w, &task.params).unwrap();
    save_inputs(&x, &task.set).unwrap();
    let (spec2, params) = load_weights(&w, 64).unwrap();
    let set = load_inputs(&x).unwrap();
    assert_eq!(spec2, spec);
    assert_eq!(set.labels, task.set.labels);
    // MXW1 stores f32
    for (a, b) in params.layers.iter().zip(&task.params.layers) {
        assert_eq!(
            a.weights,
            b.weights
                .iter()
                .map(|&v| v as f32 as f64)
                .collect::<Vec<_>>()
        );
    }
    for scheme in [MappingScheme::Staggered, MappingScheme::WeightStationary] {
        let plan = compile_network(&spec, &params, scheme).unwrap();
        let net =
            ProgrammedNetwork::new(&spec, &plan, &params, &NonIdealityConfig::ideal()).unwrap();
        for s in &set.samples {
            let a = net.infer(s).unwrap();
            let b = forward(&spec, &params, s).unwrap();
            assert!(a
                .iter()
                .zip(&b)
                .all(|(p, q)| (p - q).abs() <= 1e-9 * q.abs().max(1.0)));
        }
    }
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("rram-cnn-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn adc_resolution_sweep_is_monotone_in_expectation() {
    let spec = NetworkSpec::canonical();
    let task = separable_task(&spec, 100, 8).unwrap();
    let base = NonIdealityConfig {
        r_line: 0.0,
        r_source: 0.0,
        write_sigma: 0.05,
        ..NonIdealityConfig::default()
    };
    let rows = sweep(
        &spec,
        &task.params,
        &task.set,
        &task.set.samples,
        &base,
        "adc_bits",
        &[2.0, 4.0, 6.0, 8.0],
        &DEFAULT_SEEDS,
        &DeployOptions::default(),
        Execution::Parallel,
    )
    .unwrap();
    for w in rows.windows(2) {
        let slack = w[0].std_accuracy.max(w[1].std_accuracy);
        assert!(w[1].mean_accuracy + slack >= w[0].mean_accuracy, "{rows:?}");
    }
    assert!(rows[3].mean_accuracy > rows[0].mean_accuracy);
}

#[test]
fn wire_resistance_pass_matches_direct_solve() {
    // The network path reads passes through per-tile transfer matrices;
    // check one pass against a direct nodal solve of the same tile.
    let spec = NetworkSpec::canonical();
    let task = separable_task(&spec, 10, 4).unwrap();
    let cfg = NonIdealityConfig {
        dac_bits: None,
        adc_bits: None,
        ..NonIdealityConfig::default()
    };
    let plan = deploy_plan(
        &spec,
        &task.params,
        &task.set.samples,
        &cfg,
        &DeployOptions::default(),
    )
    .unwrap();
    let net = ProgrammedNetwork::new(&spec, &plan, &task.params, &cfg).unwrap();
    let li = plan.layer_index("fc1").unwrap();
    let pass = plan.passes_for(li).next().unwrap();
    let drive: Vec<f64> = (0..plan.layers[li].drive_len)
        .map(|i| ((i % 7) as f64 - 3.0) / 10.0)
        .collect();
    let got = net.read_pass(pass, &drive).unwrap();

    let mut v = vec![0.0; plan.tile_rows];
    for &(row, d) in &pass.rows {
        v[row] = match d {
            RowDrive::Input(k) => drive[k] / plan.layers[li].input_full_scale,
            RowDrive::Bias => 1.0,
        } * cfg.v_max;
    }
    let solver = NodalSolver::new(
        &net.tiles[pass.tile],
        cfg.r_line,
        cfg.r_source,
        DriveMode::OneSided,
    )
    .unwrap();
    let want = solver.solve(&v, cfg.v_max).unwrap();
    for (a, b) in got.currents.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-9), "{a} {b}");
    }
}
