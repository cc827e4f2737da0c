//! Seeded random sources.
//!
//! Every stochastic operation takes an explicit generator. Independent
//! workers (AIS chains, per-seed jobs) get their own ChaCha stream derived
//! from a master seed, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type XbmRng = ChaCha8Rng;

/// Generator for a master seed.
pub fn seeded(seed: u64) -> XbmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under the master `seed`.
pub fn stream(seed: u64, stream: u64) -> XbmRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for the `index`-th derived job (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
