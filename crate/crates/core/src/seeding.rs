//! Deterministic child-seed derivation. Every stochastic component keys
//! its stream off a (master seed, stream tag, index…) tuple so reruns are
//! bit-identical and streams never alias across components.

/// SplitMix64 finalizer: a bijective avalanche mix.
fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a child seed from a master seed and two stream coordinates.
///
/// Each coordinate passes through its own odd multiplier before a full
/// mix, so (a, b) and (b, a) land on unrelated streams.
pub(crate) fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let x = mix64(master.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let x = mix64(x ^ a.wrapping_mul(0xd1b5_4a32_d192_ed03).wrapping_add(1));
    mix64(x ^ b.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(2))
}

/// Derive a child seed from three stream coordinates.
pub(crate) fn derive_seed3(master: u64, a: u64, b: u64, c: u64) -> u64 {
    derive_seed(derive_seed(master, a, b), c, 0)
}
