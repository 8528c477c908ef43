//! Counter-based random streams keyed by `(seed, stream)`.
//!
//! ChaCha8 with an explicit stream id gives the same sequence on every
//! platform and independently of which thread draws it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [-1, 1].
    pub fn symmetric(&mut self) -> f64 {
        let k = self.next_u64() >> 11;
        k as f64 * (2.0 / ((1u64 << 53) - 1) as f64) - 1.0
    }

    /// Standard normal via the inverse CDF.
    pub fn gaussian(&mut self) -> f64 {
        let u = self.open01();
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..n)
    }
}
