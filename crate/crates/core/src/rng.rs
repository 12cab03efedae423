//! Seeded randomness. Every stochastic choice in a simulation is drawn from
//! a [`SimRng`] derived from the run's single 64-bit seed.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream reserved for the Up-Tree's coin flips.
pub const TREE_STREAM: u64 = 0;
/// Stream reserved for environment dynamics.
pub const ENVIRONMENT_STREAM: u64 = u64::MAX;

/// Stream id for a processor's private randomness.
pub fn processor_stream(address: usize) -> u64 {
    1 + address as u64
}

/// A portable, seed-reproducible random stream (ChaCha8).
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
    draws: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, TREE_STREAM)
    }

    /// An independent stream under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner, draws: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform on [0, 1) with 53 bits of resolution. One draw.
    pub fn unit(&mut self) -> f64 {
        self.draws += 1;
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. One draw. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    /// True with probability `p`. One draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}
