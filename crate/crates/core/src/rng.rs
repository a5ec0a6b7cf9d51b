//! Seeded random source shared by context sampling and the mock backend.
//!
//! The generator is xoshiro256** seeded from a `u64` through SplitMix64, and
//! bounded draws use rejection sampling on the full 64-bit output, so any
//! implementation of the same two algorithms reproduces the same streams.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

/// Name recorded in run artifacts next to the seed.
pub const RNG_ALGORITHM: &str = "xoshiro256** (SplitMix64 seeding, rejection-sampled bounds)";

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256StarStar,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // 2^64 mod bound; draws at or above 2^64 - rem would bias the result.
        let rem = (u64::MAX % bound + 1) % bound;
        if rem == 0 {
            return self.next_u64() % bound;
        }
        let limit = 0u64.wrapping_sub(rem);
        loop {
            let x = self.next_u64();
            if x < limit {
                return x % bound;
            }
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Partial Fisher-Yates: `k` distinct indices from `0..len` in draw order.
    pub fn choose_indices(&mut self, len: usize, k: usize) -> Vec<usize> {
        assert!(k <= len);
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..k {
            let j = i + self.index(len - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
