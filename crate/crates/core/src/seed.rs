//! Named random substreams derived from a single run seed.
//!
//! Each consumer asks for `substream(seed, name)` and seeds its own
//! generator with the result, so adding a consumer never shifts the draws of
//! another one.

/// FNV-1a over the name, mixed with the seed through a SplitMix64 finalizer.
/// Stable across platforms and compiler versions.
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(seed ^ splitmix(h))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
