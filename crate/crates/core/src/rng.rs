//! Keyed, reproducible random streams.
//!
//! Every stochastic decision in the harness draws from an [`RngStream`]
//! identified by `(master_seed, stream_id)`. Streams are backed by ChaCha12,
//! whose stream selector gives 2^64 independent keystreams per key, so two
//! consumers never couple through draw order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Concrete generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha12Rng;

/// Well-known stream identifiers. Per-episode streams are derived from these
/// with [`RngStream::derive`].
pub mod streams {
    pub const INITIAL_STATE: u64 = 0x01;
    pub const TRANSITION: u64 = 0x02;
    pub const OBSERVATION_NOISE: u64 = 0x03;
    pub const ACTION_NOISE: u64 = 0x04;
    pub const PERTURBATION: u64 = 0x05;
    pub const ACTION_PERMUTATION: u64 = 0x06;
    pub const POLICY: u64 = 0x07;
    pub const TEST_ENVS: u64 = 0x08;
    pub const EPISODE_SEEDS: u64 = 0x09;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// SplitMix64 finalizer; used to mix derived stream identifiers.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// A child stream keyed by `tag`, e.g. an episode seed.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id: mix(self.stream_id ^ mix(tag.wrapping_add(1))),
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        let mut rng = ChaCha12Rng::from_seed(seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Convenience constructor matching the harness vocabulary.
pub fn rng_stream(master_seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(master_seed, stream_id)
}
