//! Reproducible random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha stream selected by
//! `(seed, path index)`; draws within a path are taken in step order. Results
//! therefore do not depend on how paths are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Random stream dedicated to a single path.
pub struct PathStream {
    inner: ChaCha12Rng,
}

impl PathStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(path_index);
        inner.set_word_pos(0);
        PathStream { inner }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.normal();
        }
    }
}

/// Fixed chunk size used by every Monte Carlo reduction in the crate.
pub const CHUNK: usize = 1024;
