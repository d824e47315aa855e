//! Splittable seeding: every stream of randomness in the crate is derived from a
//! user seed plus a path of indices (fold, run, band, attempt...), so any single
//! fold or run can be regenerated without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of stream indices.
pub fn sub_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

pub fn rng(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(sub_seed(seed, path))
}

/// Stream tags keep unrelated consumers of the same seed apart.
pub(crate) mod stream {
    pub const PATCH: u64 = 1;
    pub const RANDOM: u64 = 2;
    pub const VALIDATION: u64 = 3;
    pub const SYNTH_SITES: u64 = 4;
    pub const SYNTH_SIGNATURES: u64 = 5;
    pub const SYNTH_CORRELATED: u64 = 6;
    pub const SYNTH_IID: u64 = 7;
    pub const SYNTH_UNLABELED: u64 = 8;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_distinct() {
        let a = sub_seed(7, &[1, 0]);
        let b = sub_seed(7, &[1, 1]);
        let c = sub_seed(7, &[0, 1]);
        let d = sub_seed(8, &[1, 0]);
        assert!(a != b && a != c && b != c && a != d);
        assert_eq!(a, sub_seed(7, &[1, 0]));
    }
}
