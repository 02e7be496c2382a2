//! Per-stage seeds derived from one global seed.

/// Pipeline stages with their own random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Holdout = 1,
    Folds = 2,
    Init = 3,
    Train = 4,
    Null = 5,
    Synth = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(stage, index)`, e.g. the training stream of fold 3.
pub fn derive_seed(global: u64, stage: Stage, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(global) ^ stage as u64) ^ index)
}
