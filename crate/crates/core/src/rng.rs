//! Seeded random streams.
//!
//! Every stochastic routine takes a `&mut` generator. Generators are
//! ChaCha8 instances built from an [`RngState`], a `(seed, stream)` pair.
//! ChaCha addresses 2^64 independent streams per seed, so parallel chains
//! and per-observation generators never share key-stream material.
//! Child seeds are derived with SplitMix64 mixing over a path of integers,
//! which gives the same value on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Name recorded in manifests for the generator used everywhere.
pub const ALGORITHM: &str = "chacha8";

pub type StreamRng = ChaCha8Rng;

/// Seed plus stream selector for a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Same seed, different stream.
    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// Independent state whose seed is derived from this one and `path`.
    pub fn derive(&self, path: &[u64]) -> Self {
        let mut s = derive_seed(self.seed, &[self.stream]);
        s = derive_seed(s, path);
        Self { seed: s, stream: 0 }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with each element of `path` in turn.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        // 53 random bits, shifted by half an ulp so 0 is impossible.
        let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}

/// Standard Gumbel draw by inversion.
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(-open_unit(rng).ln()).ln()
}
