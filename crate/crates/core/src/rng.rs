//! Deterministic random streams.
//!
//! Every consumer draws from a ChaCha8 generator keyed by `(seed, domain)`
//! and selects an independent stream by index (trajectory, sample, step).
//! Results therefore never depend on the order in which parallel workers run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Separates the random streams of different pipeline stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Dataset = 1,
    Init = 2,
    Excitation = 3,
    MonteCarlo = 4,
    Test = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `index` of `domain` under the run seed.
pub fn substream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let key = splitmix64(seed ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Uniform draw from the closed interval `[center - half_width, center + half_width]`.
pub fn uniform_around<R: Rng + ?Sized>(rng: &mut R, center: f64, half_width: f64) -> f64 {
    if half_width == 0.0 {
        return center;
    }
    center + half_width * rng.random_range(-1.0..=1.0)
}

/// `+1` or `-1` with equal probability.
pub fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}
