//! Seeded random streams.
//!
//! Every stochastic component draws from xoshiro256++ seeded through
//! SplitMix64 (`Xoshiro256PlusPlus::seed_from_u64`). Both algorithms are
//! fully specified integer recurrences, so a seed reproduces the same stream
//! on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Stream = Xoshiro256PlusPlus;

pub fn stream(seed: u64) -> Stream {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
#[inline]
pub fn unit_f64(rng: &mut Stream) -> f64 {
    use rand::RngCore;
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// SplitMix64 finalizer, used to derive child seeds from a master seed.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a sequence of labels.
pub fn derive(parent: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(parent), |acc, &l| mix(acc ^ mix(l)))
}
