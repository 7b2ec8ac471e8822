//! Deterministic seed derivation for parallel simulation.
//!
//! Every path, dataset row, and sweep grid point derives its own 64-bit seed
//! from a base seed and an index via a splitmix64-style mix, so ensembles
//! parallelize without coordination and results are independent of
//! scheduling order.

/// Derive a stream seed from `(base, index)`.
pub fn derive(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
