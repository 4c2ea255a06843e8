// SPDX-License-Identifier: Apache-2.0
//! Sequential vs rayon execution of batch inference and Monte Carlo trials.
//! Build with `--no-default-features` to see the fallback path alone.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rram_cnn::crossbar::{NonIdealityConfig, ProgrammedNetwork};
use rram_cnn::experiment::{deploy_plan, weight_space_study, DeployOptions};
use rram_cnn::nn::NetworkSpec;
use rram_cnn::parallel::Execution;
use rram_cnn::synthetic::separable_task;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn batch_inference(c: &mut Criterion) {
    let spec = NetworkSpec::canonical();
    let task = separable_task(&spec, 64, 5).unwrap();
    let cfg = NonIdealityConfig::default();
    let plan = deploy_plan(
        &spec,
        &task.params,
        &task.set.samples,
        &cfg,
        &DeployOptions::default(),
    )
    .unwrap();
    let net = ProgrammedNetwork::new(&spec, &plan, &task.params, &cfg).unwrap();
    let mut g = c.benchmark_group("infer_batch_64");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(net.infer_batch(&task.set.samples, exec).unwrap()))
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("stuck_trials_32");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(weight_space_study(5, 32, 0.05, 64, 64, exec).unwrap()))
        });
    }
    g.finish();
}

fn programming(c: &mut Criterion) {
    // dominated by the per-tile nodal transfer solves
    let spec = NetworkSpec::canonical();
    let task = separable_task(&spec, 16, 5).unwrap();
    let cfg = NonIdealityConfig::default();
    let plan = deploy_plan(
        &spec,
        &task.params,
        &task.set.samples,
        &cfg,
        &DeployOptions::default(),
    )
    .unwrap();
    let mut g = c.benchmark_group("program_with_wires");
    g.sample_size(10);
    g.bench_function("canonical", |b| {
        b.iter(|| black_box(ProgrammedNetwork::new(&spec, &plan, &task.params, &cfg).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, batch_inference, monte_carlo, programming);
criterion_main!(benches);
