// SPDX-License-Identifier: Apache-2.0
//! DAC and ADC models. Both are signed, saturating and uniform, with zero
//! an exact level.

use crate::nn::Quantizer;
use crate::Result;

/// Maps normalized inputs in `[-1, 1]` to row voltages in `[-v_max, v_max]`.
/// `bits = None` is an ideal (unquantized) driver that still saturates.
pub fn dac_convert(x: &[f64], bits: Option<u32>, v_max: f64) -> Result<Vec<f64>> {
    let q = bits.map(|b| Quantizer::signed(b, v_max)).transpose()?;
    Ok(x.iter()
        .map(|&u| {
            let v = u.clamp(-1.0, 1.0) * v_max;
            q.map_or(v, |q| q.quantize(v))
        })
        .collect())
}

/// Output codes in `0..2^bits`; zero current maps to the mid code `2^(bits-1)`.
pub fn adc_convert(currents: &[f64], bits: u32, full_scale: f64) -> Result<Vec<u64>> {
    let q = Quantizer::signed(bits, full_scale)?;
    Ok(currents.iter().map(|&i| q.code(i)).collect())
}

/// Current represented by each code.
pub fn adc_decode(codes: &[u64], bits: u32, full_scale: f64) -> Result<Vec<f64>> {
    let q = Quantizer::signed(bits, full_scale)?;
    Ok(codes.iter().map(|&c| q.level(c)).collect())
}
