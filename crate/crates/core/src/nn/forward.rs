// SPDX-License-Identifier: Apache-2.0
//! Reference forward pass in f64.

use super::arch::NetworkSpec;
use super::ops::{avgpool1d, conv1d, fully_connected, relu, Activations};
use super::params::NetworkParams;
use super::Signal;
use crate::{Error, Result};

/// Intermediate values of one forward pass, indexed like `spec.param_layers()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Unpadded, channel-major input of each parameter layer.
    pub layer_inputs: Vec<Vec<f64>>,
    /// Raw output of each parameter layer (before pooling or ReLU).
    pub layer_outputs: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

pub fn forward(spec: &NetworkSpec, params: &NetworkParams, input: &Signal) -> Result<Vec<f64>> {
    Ok(forward_trace(spec, params, input)?.logits)
}

pub fn forward_trace(spec: &NetworkSpec, params: &NetworkParams, input: &Signal) -> Result<Trace> {
    params.validate(spec)?;
    if input.len() != spec.input_length * spec.input_channels {
        return Err(Error::ShapeMismatch {
            context: "input signal".into(),
            expected: format!("{} samples", spec.input_length * spec.input_channels),
            actual: format!("{}", input.len()),
        });
    }
    let mut layer_inputs = Vec::new();
    let mut layer_outputs = Vec::new();
    let mut layers = params.layers.iter();

    let mut x = Activations::new(
        spec.input_channels,
        spec.input_length,
        input.values().to_vec(),
    )?;
    for block in &spec.blocks {
        let mut pooled = Vec::with_capacity(block.branches.len());
        for br in &block.branches {
            let p = layers.next().expect("validated");
            let c = &br.conv;
            let y = conv1d(
                &x,
                &p.weights,
                &p.bias,
                c.kernel_size,
                c.stride,
                c.padding_left,
                c.padding_right,
            )?;
            layer_inputs.push(x.data.clone());
            pooled.push(avgpool1d(&y, br.pool.kernel_size, br.pool.stride)?);
            layer_outputs.push(y.data);
        }
        x = Activations::concat(&pooled)?;
    }

    let mut v = x.data;
    for fc in &spec.fc {
        let p = layers.next().expect("validated");
        let y = fully_connected(&v, &p.weights, &p.bias)?;
        layer_inputs.push(v);
        layer_outputs.push(y.clone());
        v = if fc.relu { relu(&y) } else { y };
    }
    Ok(Trace {
        layer_inputs,
        layer_outputs,
        logits: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight-line canonical dataflow written without the shared kernels.
    fn canonical_oracle(p: &NetworkParams, x: &[f64]) -> Vec<f64> {
        let branch = |w: &[f64], b: &[f64], k: usize, pad: usize| -> Vec<f64> {
            let mut xp = vec![0.0; pad];
            xp.extend_from_slice(x);
            let conv_len = xp.len() - k + 1;
            let mut pooled = Vec::new();
            for c in 0..32 {
                let conv: Vec<f64> = (0..conv_len)
                    .map(|i| b[c] + (0..k).map(|t| w[c * k + t] * xp[i + t]).sum::<f64>())
                    .collect();
                for i in 0..conv_len / 2 {
                    pooled.push((conv[2 * i] + conv[2 * i + 1]) / 2.0);
                }
            }
            pooled
        };
        let c1 = p.layer("conv1").unwrap();
        let c2 = p.layer("conv2").unwrap();
        let mut flat = branch(&c1.weights, &c1.bias, 32, 1);
        flat.extend(branch(&c2.weights, &c2.bias, 30, 0));
        assert_eq!(flat.len(), 1088);
        let f1 = p.layer("fc1").unwrap();
        let h: Vec<f64> = (0..8)
            .map(|o| {
                let s = f1.bias[o]
                    + (0..1088)
                        .map(|i| f1.weights[o * 1088 + i] * flat[i])
                        .sum::<f64>();
                if s > 0.0 {
                    s
                } else {
                    0.0
                }
            })
            .collect();
        let f2 = p.layer("fc2").unwrap();
        (0..2)
            .map(|o| f2.bias[o] + (0..8).map(|i| f2.weights[o * 8 + i] * h[i]).sum::<f64>())
            .collect()
    }

    #[test]
    fn zero_params_give_fc2_bias() {
        let spec = NetworkSpec::canonical();
        let mut p = NetworkParams::zeros(&spec);
        p.layer_mut("fc2").unwrap().bias = vec![0.25, -1.5];
        let x = Signal::new(vec![0.3; 64]).unwrap();
        assert_eq!(forward(&spec, &p, &x).unwrap(), vec![0.25, -1.5]);
    }

    #[test]
    fn matches_straight_line_oracle() {
        let spec = NetworkSpec::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let p = NetworkParams::random(&spec, &mut rng);
            let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = forward(&spec, &p, &Signal::new(x.clone()).unwrap()).unwrap();
            let want = canonical_oracle(&p, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn trace_shapes() {
        let spec = NetworkSpec::canonical();
        let p = NetworkParams::random(&spec, &mut ChaCha8Rng::seed_from_u64(3));
        let t = forward_trace(&spec, &p, &Signal::new(vec![0.1; 64]).unwrap()).unwrap();
        let lens: Vec<usize> = t.layer_inputs.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![64, 64, 1088, 8]);
        let outs: Vec<usize> = t.layer_outputs.iter().map(Vec::len).collect();
        assert_eq!(outs, vec![32 * 34, 32 * 35, 8, 2]);
    }

    #[test]
    fn deterministic_and_scale_invariant_argmax() {
        let spec = NetworkSpec::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = NetworkParams::random(&spec, &mut rng);
        for _ in 0..20 {
            let x = Signal::new((0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let a = forward(&spec, &p, &x).unwrap();
            let b = forward(&spec, &p, &x).unwrap();
            assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            let factor = rng.random_range(0.01..100.0);
            let mut scaled = p.clone();
            let fc2 = scaled.layer_mut("fc2").unwrap();
            fc2.weights.iter_mut().for_each(|w| *w *= factor);
            fc2.bias.iter_mut().for_each(|w| *w *= factor);
            let c = forward(&spec, &scaled, &x).unwrap();
            assert_eq!(a[1] > a[0], c[1] > c[0]);
        }
    }

    #[test]
    fn wrong_input_length() {
        let spec = NetworkSpec::canonical();
        let p = NetworkParams::zeros(&spec);
        assert!(forward(&spec, &p, &Signal::new(vec![0.0; 63]).unwrap()).is_err());
    }
}
