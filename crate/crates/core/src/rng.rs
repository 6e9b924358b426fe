//! Seeded random streams.
//!
//! All randomness goes through ChaCha8, a counter-based generator, seeded
//! from an explicit `u64`. Replication `r` of an experiment uses
//! `base_seed + r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision; consumes one `u64`.
#[inline]
pub fn unit(rng: &mut Stream) -> f64 {
    rng.random::<f64>()
}

/// Uniform index in `0..n` from exactly one `u64` (no rejection loop).
#[inline]
pub fn index(rng: &mut Stream, n: usize) -> usize {
    let i = (unit(rng) * n as f64) as usize;
    i.min(n - 1)
}
