//! Counter-based random streams.
//!
//! Every Monte Carlo replica draws from its own ChaCha8 stream, keyed by
//! `(seed, replica index)`, so results do not depend on how replicas are
//! scheduled across threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// The stream for replica `replica` under the global `seed`.
pub fn replica_stream(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Uniform on `(0, 1]` with 53 random bits.
#[inline]
pub fn uniform_open0<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Exponential with the given rate by inverse CDF.
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(uniform_open0(rng)) / rate
}

/// Index drawn from unnormalised nonnegative weights.
pub fn categorical<R: RngCore + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let target = (1.0 - uniform_open0(rng)) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}
