//! Counter-based random streams.
//!
//! Every draw in a filter run comes from a ChaCha8 stream whose 256-bit key
//! is `(seed, purpose, step, index)`. A particle's randomness at a given step
//! therefore does not depend on how many other draws happened before it, or
//! on which thread evaluated it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Prior = 1,
    Transition = 2,
    Resample = 3,
    Jitter = 4,
    Observation = 5,
    Truth = 6,
    Weather = 7,
    Auxiliary = 8,
}

/// Root of a family of keyed streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for `(purpose, step, index)`.
    pub fn stream(&self, purpose: Purpose, step: u64, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(&step.to_le_bytes());
        key[24..32].copy_from_slice(&index.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// A derived key, e.g. for replicate `r` of an experiment.
    pub fn derive(&self, tag: u64) -> StreamKey {
        // splitmix64 finalizer
        let mut z = self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        StreamKey::new(z ^ (z >> 31))
    }
}
