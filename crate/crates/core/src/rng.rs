//! Seeded random streams.
//!
//! Every source of randomness in a run is an [`RngStream`] identified by a
//! `(seed, stream_id)` pair. ChaCha8 supports 2^64 independent streams per
//! key, so distinct stream ids never overlap and identical pairs replay
//! bit-for-bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id of the uniform sampler in a driver run.
pub const SAMPLER_STREAM: u64 = 0;
/// Stream id of the noise process attached to uniformly sampled points.
pub const SAMPLE_NOISE_STREAM: u64 = 1;

/// Stream id used by local run `run_id` for its own internal randomness.
pub fn run_solver_stream(run_id: u64) -> u64 {
    2 + 2 * run_id
}

/// Stream id used by local run `run_id` for objective noise.
pub fn run_noise_stream(run_id: u64) -> u64 {
    3 + 2 * run_id
}

/// Derives the master seed of problem instance `instance` from a base seed.
///
/// SplitMix64 finalizer, so neighbouring instances get unrelated keys.
pub fn instance_seed(base_seed: u64, instance: u64) -> u64 {
    let mut z = base_seed ^ instance.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
