//! Seeded, forkable random streams.
//!
//! Every stream is a ChaCha8 generator. The 256-bit key is expanded from the
//! top-level seed with SplitMix64; the 64-bit ChaCha stream id is a hash of
//! the fork path (label and index at each level). Forking therefore never
//! consumes draws from the parent, and a child stream depends only on
//! `(seed, path)`. The same seed yields the same draws on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A single-owner deterministic random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_path(seed, 0)
    }

    fn with_path(seed: u64, path: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(path);
        Self { seed, path, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream identified by `label` and `index`.
    pub fn fork(&self, label: &str, index: u64) -> Self {
        let mut state = self.path ^ fnv1a(label);
        let mixed = splitmix64(&mut state);
        let mut state = mixed ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        Self::with_path(self.seed, splitmix64(&mut state))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn unit_point(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.uniform()).collect()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
