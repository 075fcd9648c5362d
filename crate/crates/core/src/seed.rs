//! Counter-based seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a list of counters into a new seed.
pub fn derive(master: u64, counters: &[u64]) -> u64 {
    let mut h = splitmix(master);
    for &c in counters {
        h = splitmix(h ^ splitmix(c.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    h
}

pub fn rng(master: u64, counters: &[u64]) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive(master, counters))
}

/// Stream tags used to keep independent random draws apart.
pub mod tag {
    pub const PHASES: u64 = 1;
    pub const STREAMS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const TARGET: u64 = 4;
    pub const MEASUREMENT: u64 = 5;
    pub const MULTIPATH: u64 = 6;
}
