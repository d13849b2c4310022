//! Seeded random streams.
//!
//! Every stochastic component draws from a [`ChaCha8Rng`] whose seed is
//! derived from a small tuple of keys (run seed, a role tag, a round...).
//! Deriving rather than sharing streams keeps one consumer's draws from
//! shifting another's.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a hash of a label, used to key streams by name.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Mix an ordered list of keys into a single seed.
pub fn derive_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x243F_6A88_85A3_08D3u64, |acc, k| splitmix64(acc ^ splitmix64(*k)))
}

pub fn stream(keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(keys))
}

/// Role tags for derived streams.
pub mod tag {
    pub const FIELD: u64 = 1;
    pub const WARMUP: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const TRIAL: u64 = 5;
    pub const SYNTH: u64 = 6;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_key_sensitive() {
        let a: u64 = stream(&[1, 2, 3]).random();
        let b: u64 = stream(&[1, 2, 3]).random();
        let c: u64 = stream(&[1, 3, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn label_hash_distinguishes_names() {
        assert_ne!(label_hash("quickdraw"), label_hash("greedy"));
        assert_eq!(label_hash(""), 0xcbf2_9ce4_8422_2325);
    }
}
