//! Seeded random streams.
//!
//! Every sampling routine owns its generator. A generator is identified by a
//! `(seed, stream)` pair and is a ChaCha8 keystream, so draws are a pure
//! function of that pair and of the draw counter. Nothing is shared between
//! threads, which keeps results independent of the worker pool size.
//!
//! Per-trial seeds are split from a master seed with [`trial_seeds`]: trial `t`
//! reads the ChaCha8 stream `t` keyed by the master seed, and takes its first
//! word as the weight seed and its second word as the noise seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fixed stream indices, so two purposes never read the same keystream even
/// when the caller passes the same seed for both.
pub(crate) mod stream {
    pub const WEIGHTS: u64 = 0;
    pub const EDGES: u64 = 1;
    pub const GAUSS: u64 = 2;
    pub const MONTE_CARLO: u64 = 3;
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed pair for one matrix realization: one seed for the vertex weights and
/// one for the edge (Bernoulli or Gaussian) noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub weight: u64,
    pub noise: u64,
}

impl Seeds {
    pub fn new(weight: u64, noise: u64) -> Self {
        Self { weight, noise }
    }
}

pub fn trial_seeds(master_seed: u64, trial: u64) -> Seeds {
    let mut rng = stream_rng(master_seed, trial);
    let weight = rng.next_u64();
    let noise = rng.next_u64();
    Seeds { weight, noise }
}

/// Uniform draw on (0, 1].
pub(crate) fn uniform_open0(rng: &mut impl RngCore) -> f64 {
    // 53 random mantissa bits, mapped from [0,1) to (0,1].
    let bits = rng.next_u64() >> 11;
    1.0 - (bits as f64) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on [0, 1).
pub(crate) fn uniform(rng: &mut impl RngCore) -> f64 {
    let bits = rng.next_u64() >> 11;
    (bits as f64) * (1.0 / (1u64 << 53) as f64)
}
