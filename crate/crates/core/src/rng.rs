//! Named random substreams.
//!
//! Every random decision in the crate is drawn from a [`ChaCha8Rng`] whose
//! seed is derived from one global seed plus a stream name (and optionally
//! an index), so that splitting, bootstrapping, initialization, dropout and
//! shuffling can each be replayed independently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SPLIT: &str = "split";
pub const BOOTSTRAP: &str = "bootstrap";
pub const INIT: &str = "init";
pub const DROPOUT: &str = "dropout";
pub const SHUFFLE: &str = "shuffle";
pub const SGNS: &str = "sgns";
pub const SYNTH: &str = "synth";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream `name` under the global `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name))
}

/// Stream number `index` of `seed`, e.g. one per tree of a forest.
pub fn indexed(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        seed.wrapping_add(splitmix64(index.wrapping_add(1))),
    ))
}
