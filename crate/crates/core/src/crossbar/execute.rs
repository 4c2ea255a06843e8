// SPDX-License-Identifier: Apache-2.0
//! Running a compiled network on programmed tiles.

use super::{
    dac_convert, program_tile, vmm_ideal, CrossbarTile, DriveMode, NodalSolver, NonIdealityConfig,
    StuckMap,
};
use crate::mapping::{LayerKind, MappingPlan, Pass, RowDrive};
use crate::nn::{avgpool1d, relu, Activations, NetworkParams, NetworkSpec, Quantizer, Signal};
use crate::parallel::Execution;
use crate::seed::{child_rng, Stream};
use crate::{Error, Result};

/// Stuck maps for every tile of `plan`, drawn from the configuration seed.
pub fn sample_stuck_maps(plan: &MappingPlan, cfg: &NonIdealityConfig) -> Vec<StuckMap> {
    (0..plan.tiles.len())
        .map(|t| {
            let mut rng = child_rng(cfg.rng_seed, Stream::Stuck, t as u64);
            StuckMap::sample(
                plan.tile_rows,
                plan.tile_cols,
                cfg.p_stuck_on,
                cfg.p_stuck_off,
                &mut rng,
            )
        })
        .collect()
}

/// One pass read out through the converters.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    /// Sense current of every column, amperes.
    pub currents: Vec<f64>,
    /// ADC codes of every column; `None` without an ADC.
    pub codes: Option<Vec<u64>>,
    /// `(output index, recovered value)` per read column pair.
    pub outputs: Vec<(usize, f64)>,
}

/// Programmed tiles plus everything needed to run inference on them.
/// Immutable once built, so batches can be evaluated concurrently.
#[derive(Debug, Clone)]
pub struct ProgrammedNetwork {
    pub spec: NetworkSpec,
    pub plan: MappingPlan,
    pub tiles: Vec<CrossbarTile>,
    pub cfg: NonIdealityConfig,
    /// Per-tile `cols × rows` nodal transfer matrices when wires have
    /// resistance. Built once from `tiles`; editing `tiles` afterwards does
    /// not refresh them.
    transfers: Option<Vec<Vec<f64>>>,
}

impl ProgrammedNetwork {
    /// Programs `params` as laid out by `plan`, sampling stuck devices and
    /// write noise from `cfg.rng_seed`.
    pub fn new(
        spec: &NetworkSpec,
        plan: &MappingPlan,
        params: &NetworkParams,
        cfg: &NonIdealityConfig,
    ) -> Result<Self> {
        let targets = plan.target_conductances(params)?;
        let stuck = sample_stuck_maps(plan, cfg);
        Self::from_targets(spec, plan, &targets, &stuck, cfg)
    }

    /// Programs explicit per-tile target conductances, e.g. after repair.
    pub fn from_targets(
        spec: &NetworkSpec,
        plan: &MappingPlan,
        targets: &[Vec<f64>],
        stuck: &[StuckMap],
        cfg: &NonIdealityConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if targets.len() != plan.tiles.len() || stuck.len() != plan.tiles.len() {
            return Err(Error::Schedule(format!(
                "plan has {} tiles, got {} target grids and {} stuck maps",
                plan.tiles.len(),
                targets.len(),
                stuck.len()
            )));
        }
        let tiles = (0..plan.tiles.len())
            .map(|t| {
                let mut rng = child_rng(cfg.rng_seed, Stream::Write, t as u64);
                program_tile(
                    &targets[t],
                    plan.tile_rows,
                    plan.tile_cols,
                    plan.window,
                    &stuck[t],
                    cfg,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_tiles(spec, plan, tiles, cfg)
    }

    pub fn from_tiles(
        spec: &NetworkSpec,
        plan: &MappingPlan,
        tiles: Vec<CrossbarTile>,
        cfg: &NonIdealityConfig,
    ) -> Result<Self> {
        if tiles.len() != plan.tiles.len() {
            return Err(Error::Schedule(format!(
                "plan has {} tiles, got {}",
                plan.tiles.len(),
                tiles.len()
            )));
        }
        let transfers = if cfg.has_wire_resistance() {
            Some(Execution::Parallel.try_map(&tiles, |t| {
                NodalSolver::new(t, cfg.r_line, cfg.r_source, DriveMode::OneSided)?
                    .transfer_matrix()
            })?)
        } else {
            None
        };
        Ok(Self {
            spec: spec.clone(),
            plan: plan.clone(),
            tiles,
            cfg: cfg.clone(),
            transfers,
        })
    }

    fn adc(&self, layer: usize, tile: usize) -> Result<Option<Quantizer>> {
        let fs = self.plan.layers[layer]
            .adc_full_scale
            .unwrap_or(self.plan.tile_rows as f64 * self.tiles[tile].window.g_on * self.cfg.v_max);
        self.cfg
            .adc_bits
            .map(|b| Quantizer::signed(b, fs))
            .transpose()
    }

    /// Drives one pass from the layer's padded input vector.
    pub fn read_pass(&self, pass: &Pass, drive: &[f64]) -> Result<Readout> {
        let layer = &self.plan.layers[pass.layer];
        let x_fs = layer.input_full_scale;
        let mut norm = vec![0.0; self.plan.tile_rows];
        for &(row, d) in &pass.rows {
            norm[row] = match d {
                RowDrive::Input(k) => {
                    *drive.get(k).ok_or_else(|| {
                        Error::Schedule(format!(
                            "{} pass reads input {k} of {}",
                            layer.name,
                            drive.len()
                        ))
                    })? / x_fs
                }
                RowDrive::Bias => 1.0,
            };
        }
        let v = dac_convert(&norm, self.cfg.dac_bits, self.cfg.v_max)?;
        let tile = &self.tiles[pass.tile];
        let currents = match &self.transfers {
            Some(t) => {
                let t = &t[pass.tile];
                let n = self.plan.tile_rows;
                (0..self.plan.tile_cols)
                    .map(|j| {
                        t[j * n..(j + 1) * n]
                            .iter()
                            .zip(&v)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            }
            None => vmm_ideal(tile, &v, self.cfg.v_max)?,
        };
        let adc = self.adc(pass.layer, pass.tile)?;
        let sensed: Vec<f64> = match &adc {
            Some(q) => currents.iter().map(|&i| q.quantize(i)).collect(),
            None => currents.clone(),
        };
        let gain = self.plan.tiles[pass.tile].scale * self.cfg.v_max / x_fs;
        let outputs = pass
            .outputs
            .iter()
            .map(|o| (o.output, (sensed[o.col_plus] - sensed[o.col_minus]) / gain))
            .collect();
        Ok(Readout {
            codes: adc.map(|q| currents.iter().map(|&i| q.code(i)).collect()),
            currents,
            outputs,
        })
    }

    /// Raw (pre-pool, pre-ReLU) layer output and the largest column current seen.
    pub fn run_layer(&self, layer: usize, input: &[f64]) -> Result<(Vec<f64>, f64)> {
        let lp = &self.plan.layers[layer];
        let drive = lp.drive_vector(input);
        let mut out = vec![0.0; lp.output_len];
        let mut peak: f64 = 0.0;
        for pass in self.plan.passes_for(layer) {
            let r = self.read_pass(pass, &drive)?;
            for o in &pass.outputs {
                peak = peak
                    .max(r.currents[o.col_plus].abs())
                    .max(r.currents[o.col_minus].abs());
            }
            for (k, y) in r.outputs {
                out[k] += y;
            }
        }
        Ok((out, peak))
    }

    fn run(&self, input: &Signal, mut peaks: Option<&mut [f64]>) -> Result<Vec<f64>> {
        let spec = &self.spec;
        if input.len() != spec.input_length * spec.input_channels {
            return Err(Error::ShapeMismatch {
                context: "input signal".into(),
                expected: format!("{} samples", spec.input_length * spec.input_channels),
                actual: format!("{}", input.len()),
            });
        }
        let mut li = 0;
        let mut record = |li: usize, p: f64| {
            if let Some(pk) = peaks.as_deref_mut() {
                pk[li] = pk[li].max(p);
            }
        };
        let mut x = Activations::new(
            spec.input_channels,
            spec.input_length,
            input.values().to_vec(),
        )?;
        for block in &spec.blocks {
            let mut pooled = Vec::with_capacity(block.branches.len());
            for br in &block.branches {
                let LayerKind::Conv(c) = self.plan.layers[li].kind else {
                    return Err(Error::Schedule(format!("layer {li} is not a convolution")));
                };
                let (y, p) = self.run_layer(li, &x.data)?;
                record(li, p);
                let y = Activations::new(c.out_channels, y.len() / c.out_channels, y)?;
                pooled.push(avgpool1d(&y, br.pool.kernel_size, br.pool.stride)?);
                li += 1;
            }
            x = Activations::concat(&pooled)?;
        }
        let mut v = x.data;
        for fc in &spec.fc {
            let (y, p) = self.run_layer(li, &v)?;
            record(li, p);
            v = if fc.relu { relu(&y) } else { y };
            li += 1;
        }
        Ok(v)
    }

    pub fn infer(&self, input: &Signal) -> Result<Vec<f64>> {
        self.run(input, None)
    }

    pub fn infer_batch(&self, inputs: &[Signal], exec: Execution) -> Result<Vec<Vec<f64>>> {
        exec.try_map(inputs, |s| self.infer(s))
    }

    /// Sets each layer's ADC full scale to `margin` times the largest column
    /// current observed over `samples`.
    pub fn calibrate_adc(&mut self, samples: &[Signal], margin: f64) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptyEvaluationSet);
        }
        let bits = self.cfg.adc_bits.take();
        let mut peaks = vec![0.0; self.plan.layers.len()];
        let res = samples
            .iter()
            .try_for_each(|s| self.run(s, Some(&mut peaks)).map(|_| ()));
        self.cfg.adc_bits = bits;
        res?;
        for (l, p) in self.plan.layers.iter_mut().zip(peaks) {
            l.adc_full_scale = (p > 0.0).then_some(p * margin);
        }
        Ok(())
    }

    /// Parameters as represented by the programmed conductances.
    pub fn represented_params(&self) -> Result<NetworkParams> {
        let g: Vec<Vec<f64>> = self.tiles.iter().map(|t| t.conductances()).collect();
        self.plan.decompile(&self.spec, &g)
    }
}

/// Programs and runs a single input.
pub fn execute_network(
    spec: &NetworkSpec,
    plan: &MappingPlan,
    params: &NetworkParams,
    input: &Signal,
    cfg: &NonIdealityConfig,
) -> Result<Vec<f64>> {
    ProgrammedNetwork::new(spec, plan, params, cfg)?.infer(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{compile_network, MappingScheme};
    use crate::nn::forward;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn signal(rng: &mut ChaCha8Rng) -> Signal {
        Signal::new((0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn ideal_path_matches_reference() {
        let spec = NetworkSpec::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scheme in [MappingScheme::WeightStationary, MappingScheme::Staggered] {
            let params = NetworkParams::random(&spec, &mut rng);
            let plan = compile_network(&spec, &params, scheme).unwrap();
            let net =
                ProgrammedNetwork::new(&spec, &plan, &params, &NonIdealityConfig::ideal()).unwrap();
            for _ in 0..3 {
                let x = signal(&mut rng);
                let a = net.infer(&x).unwrap();
                let b = forward(&spec, &params, &x).unwrap();
                for (p, q) in a.iter().zip(&b) {
                    assert!(
                        (p - q).abs() <= 1e-9 * q.abs().max(1e-3),
                        "{scheme:?} {p} {q}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_input_zero_bias_gives_fc2_bias() {
        let spec = NetworkSpec::canonical();
        let mut params = NetworkParams::random(&spec, &mut ChaCha8Rng::seed_from_u64(2));
        for l in &mut params.layers[..3] {
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let plan = compile_network(&spec, &params, MappingScheme::WeightStationary).unwrap();
        let out = execute_network(
            &spec,
            &plan,
            &params,
            &Signal::new(vec![0.0; 64]).unwrap(),
            &NonIdealityConfig::ideal(),
        )
        .unwrap();
        let b = &params.layers[3].bias;
        assert!((out[0] - b[0]).abs() < 1e-12 && (out[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn readout_is_linear_in_pair_difference() {
        let spec = NetworkSpec::canonical();
        let params = NetworkParams::random(&spec, &mut ChaCha8Rng::seed_from_u64(3));
        let plan = compile_network(&spec, &params, MappingScheme::WeightStationary).unwrap();
        let mut net =
            ProgrammedNetwork::new(&spec, &plan, &params, &NonIdealityConfig::ideal()).unwrap();
        let pass = plan.passes_for(3).next().unwrap().clone();
        let drive = vec![0.5; 8];
        let o = pass.outputs[0];
        let base = net.read_pass(&pass, &drive).unwrap().outputs[0].1;
        let dg = 1e-6;
        let (r, _) = pass.rows[0];
        net.tiles[pass.tile].devices[r * 64 + o.col_plus].g += dg;
        let bumped = net.read_pass(&pass, &drive).unwrap().outputs[0].1;
        let expected = dg * 0.5 / plan.tiles[pass.tile].scale;
        assert!(((bumped - base) - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn stuck_maps_are_seeded() {
        let spec = NetworkSpec::canonical();
        let params = NetworkParams::random(&spec, &mut ChaCha8Rng::seed_from_u64(4));
        let plan = compile_network(&spec, &params, MappingScheme::WeightStationary).unwrap();
        let cfg = NonIdealityConfig {
            p_stuck_on: 0.05,
            p_stuck_off: 0.05,
            write_sigma: 0.05,
            rng_seed: 42,
            ..NonIdealityConfig::ideal()
        };
        let a = ProgrammedNetwork::new(&spec, &plan, &params, &cfg).unwrap();
        let b = ProgrammedNetwork::new(&spec, &plan, &params, &cfg).unwrap();
        assert_eq!(a.tiles, b.tiles);
        assert_eq!(sample_stuck_maps(&plan, &cfg)[0], a.tiles[0].stuck_map());
    }

    #[test]
    fn calibrated_adc_tracks_ideal_more_closely() {
        let spec = NetworkSpec::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = NetworkParams::random(&spec, &mut rng);
        let plan = compile_network(&spec, &params, MappingScheme::WeightStationary).unwrap();
        let xs: Vec<Signal> = (0..8).map(|_| signal(&mut rng)).collect();
        let cfg = NonIdealityConfig {
            adc_bits: Some(8),
            ..NonIdealityConfig::ideal()
        };
        let mut net = ProgrammedNetwork::new(&spec, &plan, &params, &cfg).unwrap();
        let err = |net: &ProgrammedNetwork| -> f64 {
            xs.iter()
                .map(|x| {
                    let a = net.infer(x).unwrap();
                    let b = forward(&spec, &params, x).unwrap();
                    (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
                })
                .sum()
        };
        let before = err(&net);
        net.calibrate_adc(&xs, 1.0).unwrap();
        assert!(net.plan.layers.iter().all(|l| l.adc_full_scale.is_some()));
        assert!(err(&net) < before);
    }
}
