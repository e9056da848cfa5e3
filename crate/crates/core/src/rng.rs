//! Seed derivation and deterministic random streams.
//!
//! Every randomized routine takes an explicit `u64` seed. Work that fans out
//! (bootstrap replicates, subset retrainings, permutation repeats) derives one
//! child seed per task with [`derive_seed`], so results do not depend on how
//! tasks are scheduled across threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for task `index` under `root`: `mix64(root ^ index)`.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    mix64(root ^ index)
}

/// Child seed for a path of indices, applied left to right.
pub fn derive_path(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(root, |seed, &i| derive_seed(seed, i))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    idx
}

// Stream tags keep unrelated consumers of one root seed apart.
pub(crate) mod stream {
    pub const SPLIT: u64 = 0x5350_4c49_54;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const PERMUTE: u64 = 0x5045_524d;
    pub const SUBSET: u64 = 0x5355_4253;
    pub const FIT_STATS: u64 = 0x4649_5453;
    pub const BACKGROUND: u64 = 0x4247;
    pub const INSTANCES: u64 = 0x494e_5354;
    pub const TREES: u64 = 0x5452_4545;
    pub const CI: u64 = 0x4349;
}
