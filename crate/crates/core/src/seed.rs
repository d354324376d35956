//! Seed mixing. Every random stream in the crate is derived from a root seed
//! and a stream tag, so streams stay independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// splitmix64 finalizer.
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a seed with a stream index into a new, well-mixed seed.
pub fn mix(seed: u64, stream: u64) -> u64 {
    finalize(finalize(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Generator for one counter position of a stream.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, index))
}

const DATA_TAG: u64 = 0x6461_7461; // "data"
const INIT_TAG: u64 = 0x696e_6974; // "init"
const SHUFFLE_TAG: u64 = 0x7368_7566; // "shuf"

/// Per-stage seeds fanned out from one top-level seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSeeds {
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
}

impl SubSeeds {
    pub fn from_root(seed: u64) -> Self {
        SubSeeds {
            data: mix(seed, DATA_TAG),
            init: mix(seed, INIT_TAG),
            shuffle: mix(seed, SHUFFLE_TAG),
        }
    }
}
