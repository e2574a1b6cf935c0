//! Seed derivation for deterministic per-task RNG streams.
//!
//! Every randomized component takes a `u64` seed. Sub-tasks (one tree of a
//! forest, one fold of a stacking run, one acquisition start) derive their
//! own stream from the parent seed and a label, so reordering or
//! parallelizing sub-tasks cannot change results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from `seed` and a textual label.
///
/// Uses the FNV-1a mix of the label folded into the seed through a
/// SplitMix64 finalizer; collisions between distinct labels are not a
/// correctness concern, only stream independence is.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

/// Derive a child seed indexed by an integer (tree index, fold index, ...).
pub fn derive_seed_indexed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, label).wrapping_add(splitmix64(index)))
}

/// Seeded ChaCha stream. ChaCha8 is stable across platforms and `rand`
/// releases, unlike `StdRng`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
