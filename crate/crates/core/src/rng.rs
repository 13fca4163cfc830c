//! Deterministic random streams.
//!
//! Every stochastic quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, stream id)`, so outputs are pure functions of the seed and the
//! consumers never share a stream.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

pub const GEOMETRY: u64 = 1;
pub const AP_SHADOWING: u64 = 2;
pub const USER_SHADOWING: u64 = 3;
pub const UPLINK_PILOTS: u64 = 4;
pub const DOWNLINK_PILOTS: u64 = 5;
/// Oracle batches use `ORACLE_BASE + batch`.
pub const ORACLE_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child of `seed` (snapshots, sweep points).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5eed)))
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = var`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
