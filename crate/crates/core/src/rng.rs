//! Counter-based random substreams.
//!
//! Every random quantity in the crate is a pure function of a master seed, a
//! domain tag and up to two counters. Nothing is ever drawn from a stateful
//! generator, so trees can be traversed lazily in any order and re-queried
//! bit-exactly.

/// Domain tags separating the independent families of draws.
pub mod domain {
    pub const BRANCH_ENERGY: u64 = 0x4252_414e_4348_0001;
    pub const CODEBOOK: u64 = 0x434f_4445_424b_0002;
    pub const SOURCE: u64 = 0x534f_5552_4345_0003;
    pub const DPRM_TRIAL: u64 = 0x5452_4941_4c44_0004;
    pub const CODE_TRIAL: u64 = 0x5452_4941_4c43_0005;
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// The SplitMix64 output function (a bijection on `u64`).
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes `(seed, domain, a, b)` into a well-mixed 64-bit word.
#[inline]
pub fn mix(seed: u64, domain: u64, a: u64, b: u64) -> u64 {
    let h = splitmix64(seed ^ domain.wrapping_mul(GOLDEN_GAMMA));
    let h = splitmix64(h ^ a);
    splitmix64(h.rotate_left(23) ^ b)
}

/// Maps a 64-bit word to a uniform double in the open interval (0, 1).
#[inline]
pub fn to_open_unit(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[inline]
pub fn uniform(seed: u64, domain: u64, a: u64, b: u64) -> f64 {
    to_open_unit(mix(seed, domain, a, b))
}

/// Seed of the `index`-th child stream of `seed` within `domain`.
#[inline]
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    mix(seed, domain, index, 0x5eed)
}
