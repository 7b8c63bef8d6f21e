//! Counter-based seed derivation. Every random entity gets its own stream
//! keyed by the master seed and an index path, so results do not depend on
//! how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of `master` and an index path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(master);
    for (depth, &i) in path.iter().enumerate() {
        h = splitmix(h ^ splitmix(i.wrapping_add((depth as u64) << 56)));
    }
    h
}

pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn rng_for(master: u64, path: &[u64]) -> SimRng {
    rng_from(derive_seed(master, path))
}

/// Stream labels used in index paths.
pub mod stream {
    pub const REALIZATION: u64 = 0;
    pub const TRAJECTORY: u64 = 1;
    pub const SHOT: u64 = 2;
    pub const MODEL: u64 = 3;
    pub const AUX: u64 = 4;
}
