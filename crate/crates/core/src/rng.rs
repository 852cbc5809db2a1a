//! Seeded, versioned random source.
//!
//! Every draw that shapes a split or a training order goes through
//! [`SeededRng::below`], which maps raw ChaCha8 output to a bounded index by
//! rejection sampling. The mapping is fixed here rather than delegated to
//! `rand`'s range sampler so that the same seed yields the same split across
//! machines and dependency upgrades.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Name recorded in split files for the sampling algorithm below.
pub const RNG_ALGORITHM: &str = "chacha8-rejection-fisher-yates/1";

/// Fixed seed offsets so that one user seed drives every subsystem.
pub mod offsets {
    pub const FEWSHOT: u64 = 1_000_003;
    pub const INIT: u64 = 2_000_003;
    pub const SHUFFLE: u64 = 3_000_017;
    pub const GRADCHECK: u64 = 4_000_037;
    pub const DESCRIPTION: u64 = 5_000_011;
}

pub fn derive(seed: u64, offset: u64) -> u64 {
    seed.wrapping_add(offset)
}

pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_bytes(seed: [u8; 32]) -> Self {
        SeededRng(ChaCha8Rng::from_seed(seed))
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.0.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// Uniform real in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<X>(&mut self, xs: &mut [X]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct positions of `0..n`, in draw order (partial Fisher-Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_indices_are_distinct_and_reproducible() {
        let a = SeededRng::new(9).sample_indices(20, 7);
        let b = SeededRng::new(9).sample_indices(20, 7);
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 7);
        assert!(a.iter().all(|&i| i < 20));
    }

    #[test]
    fn below_covers_range() {
        let mut rng = SeededRng::new(1);
        let mut seen = [false; 5];
        for _ in 0..200 {
            seen[rng.below(5)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
