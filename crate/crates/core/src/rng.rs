//! Counter-derived random streams.
//!
//! Every randomized stage draws from a stream keyed by `(root, path)`, so a
//! replication or bootstrap draw sees the same numbers no matter which worker
//! runs it or how many siblings exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child stream for `path` under `root`.
pub fn stream(root: u64, path: &[u64]) -> Stream {
    let mut key = splitmix64(root);
    for &p in path {
        key = splitmix64(key ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(key)
}

/// Stage tags used as the second path component inside a replication.
pub mod stage {
    pub const COEFFICIENTS: u64 = 1;
    pub const SIGMA_U: u64 = 2;
    pub const ERRORS: u64 = 3;
    pub const CROSS_VALIDATION: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
}
