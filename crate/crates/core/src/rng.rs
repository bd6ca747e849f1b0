//! Counter-style random streams.
//!
//! Every random draw in the solvers comes from a generator keyed by the master
//! seed plus a small tuple of coordinates (purpose, replica, step, ...). A
//! replica's noise at a given step is therefore the same no matter which
//! thread computes it or in which order replicas are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. Kept distinct so two uses of the same (replica, step)
/// coordinates never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    ThetaInit = 1,
    Gumbel = 2,
    Substitution = 3,
    Genetic = 4,
    Instance = 5,
    Baseline = 6,
    TestFunction = 7,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a list of coordinates into a single 64-bit key.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[purpose as u64, a, b]))
}
