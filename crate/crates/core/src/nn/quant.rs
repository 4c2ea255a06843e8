// SPDX-License-Identifier: Apache-2.0
//! Uniform fixed-point quantization with saturation.

use crate::{Error, Result};

/// `2^bits` evenly spaced levels from `lo` to `hi` inclusive; inputs are
/// clipped into `[lo, hi]` and rounded to the nearest level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    bits: u32,
    lo: f64,
    hi: f64,
    step: f64,
}

impl Quantizer {
    pub fn new(bits: u32, lo: f64, hi: f64) -> Result<Self> {
        if bits == 0 || bits > 52 {
            return Err(Error::Config(format!(
                "quantizer bits must be in 1..=52, got {bits}"
            )));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::EmptyRange { lo, hi });
        }
        let step = (hi - lo) / ((1u64 << bits) - 1) as f64;
        Ok(Self { bits, lo, hi, step })
    }

    /// Signed converter convention: `2^bits` levels at multiples of
    /// `full_scale / 2^(bits-1)`, from `-full_scale` up to one step below
    /// `+full_scale`. Zero is an exact level.
    pub fn signed(bits: u32, full_scale: f64) -> Result<Self> {
        if bits == 0 || bits > 52 {
            return Err(Error::Config(format!(
                "quantizer bits must be in 1..=52, got {bits}"
            )));
        }
        let lsb = full_scale / (1u64 << (bits - 1)) as f64;
        Self::new(bits, -full_scale, full_scale - lsb)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn level_count(&self) -> u64 {
        1u64 << self.bits
    }

    /// Index of the nearest level, `0..2^bits`.
    pub fn code(&self, x: f64) -> u64 {
        let clipped = x.clamp(self.lo, self.hi);
        let k = ((clipped - self.lo) / self.step).round();
        (k as u64).min(self.level_count() - 1)
    }

    pub fn level(&self, code: u64) -> f64 {
        if code + 1 >= self.level_count() {
            self.hi
        } else {
            self.lo + code as f64 * self.step
        }
    }

    pub fn quantize(&self, x: f64) -> f64 {
        self.level(self.code(x))
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.level_count()).map(|k| self.level(k))
    }
}

pub fn quantize_fixed(x: &[f64], bits: u32, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let q = Quantizer::new(bits, lo, hi)?;
    Ok(x.iter().map(|&v| q.quantize(v)).collect())
}
