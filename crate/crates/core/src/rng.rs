//! Seed derivation for reproducible, parallelizable random streams.
//!
//! Every random decision in the workspace draws from a [`ChaCha12Rng`] seeded
//! through [`derive_seed`], so a run is fully determined by one root seed and
//! independent streams can be generated in parallel without order effects.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer; decorrelates nearby seed inputs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed for stream `stream` of a root `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// ChaCha12 generator for the given root seed and stream index.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Seeded random subset: the first `n` indices of a shuffled 0..len.
pub fn seeded_subset(len: usize, n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut stream_rng(seed, 0x5B5E7));
    idx.truncate(n);
    idx
}
