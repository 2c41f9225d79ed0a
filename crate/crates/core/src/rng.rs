//! Reproducible random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream: the key comes from the
//! master seed and the stream id is the trajectory index. Within a trajectory
//! draws are consumed in a fixed order (zonal pair, then two per mode, step
//! by step), so results do not depend on how trajectories are scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

pub type StreamRng = ChaCha8Rng;

pub fn trajectory_rng(seed: u64, trajectory: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

/// Independent RNG for auxiliary purposes (test ensembles, replays), keyed by
/// `(seed, purpose, index)`.
pub fn keyed_rng(seed: u64, purpose: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `(xi1 + i xi2) / sqrt(2)`: unit-variance circular complex normal.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}
