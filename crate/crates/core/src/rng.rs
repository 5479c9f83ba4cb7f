//! Portable random streams.
//!
//! Every stream is a xoshiro256++ generator whose 256-bit state is expanded
//! with SplitMix64 from a 64-bit stream key (`rand_xoshiro`'s
//! `seed_from_u64`). Stream keys mix the master seed with a lane (e.g. the
//! technology) and an index (e.g. the cycle), so draws of one lane never
//! shift when another lane is added or removed:
//!
//! ```text
//! key = splitmix64(splitmix64(master ^ (lane * 0x9E3779B97F4A7C15)) ^ index)
//! ```
//!
//! Uniform floats use the top 53 bits (`(x >> 11) * 2^-53`); bounded integers
//! use Lemire's multiply-shift with rejection.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Stream = Xoshiro256PlusPlus;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_key(master: u64, lane: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ lane.wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ index)
}

pub fn stream(master: u64, lane: u64, index: u64) -> Stream {
    Stream::seed_from_u64(stream_key(master, lane, index))
}

/// Uniform in [0, 1).
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `lo..=hi`.
pub fn uniform_inclusive<R: RngCore + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> u32 {
    debug_assert!(lo <= hi);
    let span = (hi - lo) as u64 + 1;
    let threshold = span.wrapping_neg() % span;
    loop {
        let m = rng.next_u64() as u128 * span as u128;
        if (m as u64) >= threshold {
            return lo + (m >> 64) as u32;
        }
    }
}
