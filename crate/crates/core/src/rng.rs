//! Counter-based deterministic randomness.
//!
//! Edge marks `U_ij` are never stored: they are recomputed on demand from a
//! stateless hash of `(seed, min(i,j), max(i,j))`. This keeps coupled graph
//! constructions (`G`/`I`, cross-intensity thinning) reproducible under a
//! single seed without `O(N^2)` memory.

use crate::{Error, Result};

/// SplitMix64 finalization step. Full-period, passes BigCrush as a mixer.
#[inline(always)]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Absorb one word into a running hash state.
#[inline(always)]
pub fn mix(state: u64, word: u64) -> u64 {
    splitmix64(state ^ word.rotate_left(32))
}

/// FNV-1a over raw bytes; used to fold experiment identifiers into seeds.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Map a hash word to `[0, 1)` using the top 53 bits.
#[inline(always)]
pub fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// The symmetric edge mark `U_ij = U_ji` for an unordered node pair.
///
/// Deterministic in `(seed, {i, j})` and statistically uniform on `[0, 1)`.
pub fn edge_uniform(seed: u64, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidParams(format!("edge uniform needs i != j, got i = j = {i}")));
    }
    Ok(edge_uniform_unchecked(seed, i, j))
}

#[inline(always)]
pub(crate) fn edge_uniform_unchecked(seed: u64, i: usize, j: usize) -> f64 {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let h = mix(mix(splitmix64(seed), lo as u64), hi as u64);
    to_unit(h)
}

/// Per-node uniform, e.g. for coupled thinning across intensities.
#[inline(always)]
pub fn node_uniform(seed: u64, i: usize) -> f64 {
    to_unit(mix(splitmix64(seed ^ 0x6e6f_6465), i as u64))
}

/// Derive a sub-seed from a master seed and a label plus indices.
///
/// Used for `(experiment, sweep point, trial)` seeding so every trial is an
/// independent deterministic stream.
pub fn sub_seed(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = mix(splitmix64(master), hash_str(label));
    for &ix in indices {
        h = mix(h, ix);
    }
    h
}
