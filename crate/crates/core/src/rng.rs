//! Seed derivation. One root seed fans out into named, independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for the stream `name` under `root`.
pub fn derive_seed(root: u64, name: &str) -> u64 {
    mix64(mix64(root) ^ fnv1a(name))
}

/// Seed for the `index`-th member of a family (chains, episodes, restarts).
pub fn derive_indexed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn stream(root: u64, name: &str) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(root, name))
}

pub fn rng_from(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Counter-based hash of `(seed, counter)` to `[0, 1)`.
pub fn hash01(seed: u64, counter: u64) -> f64 {
    let bits = mix64(mix64(seed) ^ counter.wrapping_mul(0xD1B5_4A32_D192_ED03));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
