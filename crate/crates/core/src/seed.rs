//! Counter-based seed splitting: every subsystem draws from its own stream
//! derived from the single run seed.

/// Stream id for the ensemble tuner's random simplex search.
pub const STREAM_TUNER: u64 = 1;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream` under `root`. Distinct streams are decorrelated and
/// each depends only on `(root, stream)`.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    mix64(root ^ mix64(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// 64-bit FNV-1a, used to turn labels and texts into stream ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
