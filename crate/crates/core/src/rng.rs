//! Seed derivation and per-stream RNG construction.
//!
//! All randomness in the crate flows through [`ChaCha8Rng`] streams derived
//! from a master seed with a SplitMix64-style mix. Any unit of work (a tree,
//! a fold, a tuning iteration) owns its own stream, so results do not depend
//! on scheduling or worker counts. The exact mixing is part of the model
//! file contract; see `docs/model_format.md`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mix a master seed with a stream index into an independent 64-bit seed.
///
/// SplitMix64 finalizer applied to `master ^ ((stream + 1) * GOLDEN_GAMMA)`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG seeded for a given (master seed, stream index) pair.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}
