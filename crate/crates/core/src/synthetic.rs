// SPDX-License-Identifier: Apache-2.0
//! Two-class task that a known network separates by construction.
//!
//! A random network is the oracle: candidate inputs are labelled by its
//! float forward pass, the last bias is shifted so the classes split evenly,
//! and only the most confident half of the candidates of each class is kept.
//! The oracle therefore scores 100% and every kept sample clears a margin.

use rand::Rng;

use crate::io::SampleSet;
use crate::metrics::score;
use crate::nn::{forward, NetworkParams, NetworkSpec, Signal};
use crate::seed::{child_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub set: SampleSet,
    /// Smallest `|logit1 - logit0|` among kept samples.
    pub margin: f64,
}

/// `n` signals of i.i.d. `U(-1, 1)` samples.
pub fn random_inputs(n: usize, length: usize, seed: u64, stream_index: u64) -> Vec<Signal> {
    let mut rng = child_rng(seed, Stream::Synthetic, stream_index);
    (0..n)
        .map(|_| {
            Signal::new((0..length).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite")
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Builds a balanced task of `n` samples (`n` even) from a random oracle.
pub fn separable_task(spec: &NetworkSpec, n: usize, seed: u64) -> Result<SyntheticTask> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::Config(format!(
            "synthetic set size must be even and positive, got {n}"
        )));
    }
    if spec.output_len() != 2 {
        return Err(Error::InvalidSpec(
            "synthetic task needs a two-logit network".into(),
        ));
    }
    let len = spec.input_length * spec.input_channels;
    let mut params = NetworkParams::random(spec, &mut child_rng(seed, Stream::Synthetic, 0));
    let candidates = random_inputs(4 * n, len, seed, 1);
    let scores = candidates
        .iter()
        .map(|x| forward(spec, &params, x).map(|l| score(&l)))
        .collect::<Result<Vec<_>>>()?;

    // Centre the decision threshold on the candidate median.
    let shift = median(scores.clone());
    let last = params
        .layers
        .last_mut()
        .expect("two-logit network has layers");
    last.bias[1] -= shift / 2.0;
    last.bias[0] += shift / 2.0;
    let scores: Vec<f64> = scores.into_iter().map(|s| s - shift).collect();

    let mut pos: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.0).collect();
    let mut neg: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] < 0.0).collect();
    if pos.len() < n / 2 || neg.len() < n / 2 {
        return Err(Error::Config(
            "oracle network is too degenerate to split the candidates".into(),
        ));
    }
    pos.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    neg.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut keep: Vec<(usize, u8)> = pos[..n / 2]
        .iter()
        .map(|&i| (i, 1))
        .chain(neg[..n / 2].iter().map(|&i| (i, 0)))
        .collect();
    // restore candidate order so labels interleave
    keep.sort_by_key(|&(i, _)| i);
    let margin = keep
        .iter()
        .map(|&(i, _)| scores[i].abs())
        .fold(f64::INFINITY, f64::min);
    Ok(SyntheticTask {
        spec: spec.clone(),
        set: SampleSet {
            length: len,
            samples: keep.iter().map(|&(i, _)| candidates[i].clone()).collect(),
            labels: Some(keep.iter().map(|&(_, y)| y).collect()),
        },
        params,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{argmax2, evaluate};

    #[test]
    fn oracle_is_perfect_and_balanced() {
        let spec = NetworkSpec::canonical();
        let t = separable_task(&spec, 40, 5).unwrap();
        let labels = t.set.labels.as_ref().unwrap();
        assert_eq!(labels.iter().filter(|&&y| y == 1).count(), 20);
        let logits: Vec<Vec<f64>> = t
            .set
            .samples
            .iter()
            .map(|x| forward(&spec, &t.params, x).unwrap())
            .collect();
        let m = evaluate(&logits, labels, None).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.auroc, Some(1.0));
        assert!(t.margin > 0.0);
        for l in &logits {
            assert!(score(l).abs() >= t.margin * (1.0 - 1e-9));
        }
        assert_eq!(argmax2(&logits[0]), labels[0]);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = NetworkSpec::canonical();
        let a = separable_task(&spec, 10, 3).unwrap();
        let b = separable_task(&spec, 10, 3).unwrap();
        assert_eq!(a.set, b.set);
        assert_eq!(a.params, b.params);
        assert!(separable_task(&spec, 7, 3).is_err());
    }
}
