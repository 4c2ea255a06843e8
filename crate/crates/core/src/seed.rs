// SPDX-License-Identifier: Apache-2.0
//! Child-seed derivation so that Monte Carlo trials are order independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams drawn from one configuration seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Stuck = 1,
    Write = 2,
    Trial = 3,
    Synthetic = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn child_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(seed ^ (stream as u64).rotate_left(56));
    splitmix64(a ^ splitmix64(index))
}

pub fn child_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, stream, index))
}
