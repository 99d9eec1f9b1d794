//! Seeded random stream shared by all stochastic routines.
//!
//! Draw order within one training step is fixed: one draw picks the training
//! example, one draw picks the in-bucket offset `r`, then one uniform per
//! updatable synapse, rows ascending and columns ascending within a row.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identity of the generator, recorded in run manifests.
pub const GENERATOR: &str = "rand_chacha-0.3 ChaCha8Rng::seed_from_u64; uniform = rand-0.8 Standard f64";

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}
