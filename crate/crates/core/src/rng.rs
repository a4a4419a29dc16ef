//! Deterministic seed derivation.
//!
//! Every randomized stage derives its own generator from `(master seed,
//! stream index, domain)` so results never depend on execution order or
//! worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const DOMAIN_TREE: u64 = 1;
pub(crate) const DOMAIN_SVM: u64 = 2;
pub(crate) const DOMAIN_SPLIT: u64 = 3;
pub(crate) const DOMAIN_SYNTH: u64 = 4;
pub(crate) const DOMAIN_RANK: u64 = 5;

/// A generator keyed by (seed, stream, domain); stable across platforms.
pub(crate) fn stream_rng(seed: u64, stream: u64, domain: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&domain.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Collapse (master, domain) into a recordable sub-seed (splitmix64 step).
pub fn derive_seed(master: u64, domain: u64) -> u64 {
    let mut z = master
        .wrapping_add(domain.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
