//! Seeded randomness.
//!
//! Every random draw in the crate comes from a ChaCha12 generator keyed by a
//! `(seed, stream)` pair. Walk sampling, additive noise and randomized
//! response use distinct stream ids, so they stay independent while sharing
//! one master seed, and a given pair always replays the same sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha12Rng;

/// Token holder selection on the complete graph.
pub const WALK_STREAM: u64 = 1;
/// Additive Gaussian / Laplace perturbation.
pub const NOISE_STREAM: u64 = 2;
/// Randomized response coin flips and replacement values.
pub const RESPONSE_STREAM: u64 = 3;
/// Random initialization block of the ring histogram.
pub const INIT_STREAM: u64 = 4;
/// Dataset synthesis, splitting and partitioning.
pub const DATA_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngContract {
    pub seed: u64,
    pub stream: u64,
}

impl RngContract {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Derives the seed of run `index` from a master seed (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
