//! Seed derivation.
//!
//! Every random decision takes its seed from `derive(run_seed, purpose)`,
//! where `run_seed = base_seed + run_index`. The purpose string is hashed
//! with FNV-1a, xor-ed into the run seed and passed through one round of
//! SplitMix64. Results therefore depend only on (base seed, run, purpose)
//! and never on scheduling.

/// Seed purpose for undersampling.
pub const UNDERSAMPLE: &str = "undersample";
/// Seed purpose for fold assignment.
pub const FOLDS: &str = "folds";
/// Seed purpose for random weight initialisation.
pub const INIT: &str = "init";

pub fn derive(seed: u64, purpose: &str) -> u64 {
    splitmix64(seed ^ fnv1a(purpose.as_bytes()))
}

/// Seed of undersampling run `run` under `base`.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_add(run as u64)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
