//! Deterministic seed derivation.
//!
//! Every random draw in the crate starts from a [`RandomSeed`]. Child seeds
//! are derived with a SplitMix64 finalizer, and a seed expands into a
//! ChaCha8 generator whose stream number separates independent substreams
//! (inputs vs. observation noise) of the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

/// Substream used for system inputs `u_t`.
pub const INPUT_STREAM: u64 = 0;
/// Substream used for observation noise `z_t`.
pub const NOISE_STREAM: u64 = 1;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomSeed {
    /// Child seed for `tag`. Distinct tags give decorrelated children.
    pub fn derive(self, tag: u64) -> RandomSeed {
        RandomSeed(mix64(self.0 ^ mix64(tag)))
    }

    /// Per-trial seed: `master ⊕ hash(T, trial_index)`.
    pub fn for_trial(self, sample_budget: u64, trial_index: u64) -> RandomSeed {
        let h = mix64(mix64(sample_budget) ^ trial_index.wrapping_mul(GOLDEN_GAMMA));
        RandomSeed(self.0 ^ h)
    }

    pub fn rng(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}

impl From<u64> for RandomSeed {
    fn from(seed: u64) -> Self {
        RandomSeed(seed)
    }
}
