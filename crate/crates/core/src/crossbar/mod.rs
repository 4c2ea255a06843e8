// SPDX-License-Identifier: Apache-2.0
//! Analog model of programmed tiles and network execution on them.

mod config;
mod convert;
mod device;
mod execute;
mod vmm;

pub use config::NonIdealityConfig;
pub use convert::{adc_convert, adc_decode, dac_convert};
pub use device::{program_tile, CrossbarTile, DeviceState, StuckMap, StuckState};
pub use execute::{execute_network, sample_stuck_maps, ProgrammedNetwork, Readout};
pub use vmm::{vmm_ideal, vmm_nonideal, DriveMode, NodalSolver};
