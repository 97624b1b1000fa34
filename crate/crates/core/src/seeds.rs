//! Deterministic sub-seed derivation.
//!
//! `derive_seed(master, tag, index)` hashes the stage tag with FNV-1a, mixes
//! it with the master seed and index, and finishes with a SplitMix64 round.
//! Stages can therefore be rerun in isolation with the same sub-seed.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mixed = splitmix64(master ^ fnv1a(tag.as_bytes()));
    splitmix64(mixed ^ splitmix64(index))
}

/// Human-readable description stamped into reports.
pub const SCHEME: &str = "splitmix64(splitmix64(master ^ fnv1a(tag)) ^ splitmix64(index))";
