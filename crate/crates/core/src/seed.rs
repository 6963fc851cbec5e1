//! Stable seed derivation so parallel schedules never change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over UTF-8 bytes; stable across platforms and compiler versions.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_mul(0xd134_2543_de82_ef95))
}

pub fn rng_for(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}
