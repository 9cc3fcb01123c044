//! Seed derivation.
//!
//! A single master seed drives every random choice of a run. Each consumer
//! (initialization, shuffling, partitioning, a client in a given round) gets
//! its own ChaCha stream whose seed is a hash of the master seed and a path of
//! identifiers, so adding a client never shifts the stream of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream domains; the first element of every derivation path.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const PARTITION: u64 = 3;
    pub const CLIENT: u64 = 4;
    pub const AUGMENT: u64 = 5;
    pub const SYNTHETIC: u64 = 6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `master` together with `path` into a new 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    h
}

pub fn derive_rng(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}

/// The stream a client uses during local training in `round`; centralized
/// training uses client 0 with the epoch as round.
pub fn client_rng(master: u64, client: u32, round: u32) -> SimRng {
    derive_rng(master, &[stream::CLIENT, u64::from(client), u64::from(round)])
}
