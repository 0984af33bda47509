//! Seed derivation.
//!
//! Every randomised task draws from its own ChaCha8 stream. Child seeds are
//! derived with exact 64-bit integer arithmetic:
//!
//! ```text
//! splitmix64(z):
//!     z = z + 0x9E3779B97F4A7C15            (mod 2^64)
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!     return z ^ (z >> 31)
//!
//! derive(seed, index)   = splitmix64(splitmix64(seed) ^ index)
//! mix(master, g, r)     = derive(master, (g << 32) | r)      g, r < 2^32
//! ```
//!
//! `splitmix64` is a bijection of `u64`, so for a fixed master seed distinct
//! `(g, r)` pairs always map to distinct task seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const fn splitmix64(z: u64) -> u64 {
    let z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index)
}

/// Seed of replicate `r` at grid point `g`.
pub fn mix(master: u64, g: u64, r: u64) -> u64 {
    assert!(g < (1 << 32) && r < (1 << 32), "mix indices must fit in 32 bits");
    derive(master, (g << 32) | r)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
