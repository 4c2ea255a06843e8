// SPDX-License-Identifier: Apache-2.0
//! Simulator for a parallel 1D convolutional network executed on 64×64
//! memristive (RRAM) crossbar tiles.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: architecture generator, floating-point reference forward pass,
//!   parameter counting and fixed-point quantizers.
//! - [`mapping`]: compiles network parameters onto crossbar tiles using the
//!   staggered (im2col) or weight-stationary layout with differential pairs.
//! - [`crossbar`]: device programming with write non-idealities, ideal and
//!   nodal-analysis VMMs, DAC/ADC conversion and full network execution.
//! - [`mitigation`]: stuck weight offsetting and the inner-fault-tolerance
//!   baseline.
//! - [`cost`]: component-level area/power/latency/energy accounting.
//! - [`experiment`]: seeded sweeps and mitigation studies built on the above.
//!
//! Data-parallel loops (batch inference, Monte Carlo trials, sweeps) go
//! through [`parallel`], which uses rayon when the `parallel` feature is on.

pub mod cost;
pub mod crossbar;
pub mod error;
pub mod experiment;
pub mod io;
pub mod mapping;
pub mod metrics;
pub mod mitigation;
pub mod nn;
pub mod parallel;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
