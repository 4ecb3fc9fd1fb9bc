//! Seeded randomness for runs and scenario generation.
//!
//! All draws come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`, one stream per purpose selected with `set_stream`.
//! Only raw `next_u64` outputs are used and reduced here with fixed
//! arithmetic, so another implementation of ChaCha8 replays the same draws:
//!
//! * integer in `lo..=hi`: `lo + x % (hi - lo + 1)`
//! * probability: `(x >> 11) as f64 / 2^53`

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream used for resolving randomized failure plans.
pub const FAILURE_STREAM: u64 = 1;
/// Stream used by the scenario generator.
pub const GENERATOR_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform-ish integer in `lo..=hi` (modulo reduction).
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo;
        let x = self.next_u64();
        if span == u64::MAX {
            x
        } else {
            lo + x % (span + 1)
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.range(0, len as u64 - 1) as usize
    }

    /// Float in `[0, 1)` from the top 53 bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}
