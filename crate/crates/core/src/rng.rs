//! Seeded, counter-addressed random streams.
//!
//! Every random quantity is drawn from a ChaCha stream keyed by the master
//! seed and a domain tag, with the stream id derived from a pair of indices
//! (typically a drop or realization index and a link index). Draws are
//! therefore reproducible and independent of evaluation order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Domain separation for the different consumers of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Positions = 1,
    Shadowing = 2,
    Channel = 3,
    ChannelCopy = 4,
    PilotNoise = 5,
    Targets = 6,
    Scenario = 7,
    Property = 8,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Opens the stream `(seed, domain, a, b)`.
pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed ^ splitmix64(domain as u64));
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(splitmix64(a) ^ splitmix64(b.wrapping_add(0x5851_f42d_4c95_7f2d)).rotate_left(17));
    rng
}

/// Circularly-symmetric complex Gaussian with unit total variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
