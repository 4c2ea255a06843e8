// SPDX-License-Identifier: Apache-2.0
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Analog non-idealities applied when programming and reading tiles.
///
/// `None` for a bit width disables that quantizer. Serialized as a flat JSON
/// object; absent keys take the defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonIdealityConfig {
    pub dac_bits: Option<u32>,
    pub adc_bits: Option<u32>,
    pub write_bits: Option<u32>,
    /// Relative standard deviation of the multiplicative write error.
    pub write_sigma: f64,
    pub p_stuck_on: f64,
    pub p_stuck_off: f64,
    /// Wire resistance between adjacent cells, ohms.
    pub r_line: f64,
    /// Driver output resistance, ohms.
    pub r_source: f64,
    /// Multiplies both ends of the conductance window.
    pub g_window_scale: f64,
    pub v_max: f64,
    pub rng_seed: u64,
}

impl Default for NonIdealityConfig {
    fn default() -> Self {
        Self {
            dac_bits: Some(6),
            adc_bits: Some(6),
            write_bits: None,
            write_sigma: 0.0,
            p_stuck_on: 0.0,
            p_stuck_off: 0.0,
            r_line: 2.0,
            r_source: 20.0,
            g_window_scale: 1.0,
            v_max: 0.3,
            rng_seed: 0,
        }
    }
}

impl NonIdealityConfig {
    /// Everything off: exact conductances, no converters, no wire resistance.
    pub fn ideal() -> Self {
        Self {
            dac_bits: None,
            adc_bits: None,
            r_line: 0.0,
            r_source: 0.0,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn has_wire_resistance(&self) -> bool {
        self.r_line > 0.0 || self.r_source > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        prob("p_stuck_on", self.p_stuck_on)?;
        prob("p_stuck_off", self.p_stuck_off)?;
        if self.p_stuck_on + self.p_stuck_off > 1.0 {
            return Err(Error::Config("p_stuck_on + p_stuck_off exceeds 1".into()));
        }
        for (name, bits) in [
            ("dac_bits", self.dac_bits),
            ("adc_bits", self.adc_bits),
            ("write_bits", self.write_bits),
        ] {
            if let Some(b) = bits {
                if !(1..=52).contains(&b) {
                    return Err(Error::Config(format!("{name} must be in 1..=52, got {b}")));
                }
            }
        }
        if !(self.r_line >= 0.0 && self.r_line.is_finite())
            || !(self.r_source >= 0.0 && self.r_source.is_finite())
        {
            return Err(Error::Config(
                "r_line and r_source must be finite and non-negative".into(),
            ));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::Config(format!(
                "v_max must be positive, got {}",
                self.v_max
            )));
        }
        if !(self.write_sigma >= 0.0 && self.write_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "write_sigma must be non-negative, got {}",
                self.write_sigma
            )));
        }
        if !(self.g_window_scale > 0.0 && self.g_window_scale.is_finite()) {
            return Err(Error::Config(format!(
                "g_window_scale must be positive, got {}",
                self.g_window_scale
            )));
        }
        Ok(())
    }

    /// Sets one named knob from a number, as used by sweeps. Bit widths
    /// accept `0` for "disabled"; `stuck_rate` splits evenly between
    /// stuck-on and stuck-off.
    pub fn set_knob(&mut self, knob: &str, value: f64) -> Result<()> {
        let bits = |v: f64| -> Result<Option<u32>> {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "bit width must be a whole number, got {v}"
                )));
            }
            Ok((v > 0.0).then_some(v as u32))
        };
        match knob {
            "dac_bits" => self.dac_bits = bits(value)?,
            "adc_bits" => self.adc_bits = bits(value)?,
            "write_bits" => self.write_bits = bits(value)?,
            "write_sigma" => self.write_sigma = value,
            "p_stuck_on" => self.p_stuck_on = value,
            "p_stuck_off" => self.p_stuck_off = value,
            "stuck_rate" => {
                self.p_stuck_on = value / 2.0;
                self.p_stuck_off = value / 2.0;
            }
            "r_line" => self.r_line = value,
            "r_source" => self.r_source = value,
            "g_window_scale" => self.g_window_scale = value,
            "v_max" => self.v_max = value,
            other => return Err(Error::Config(format!("unknown knob {other:?}"))),
        }
        self.validate()
    }
}
