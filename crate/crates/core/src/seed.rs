//! Seed derivation: one global seed fans out to independent per-stage
//! streams via a SplitMix64 finalizer.

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `stage` derived from `seed`: `splitmix64(seed ⊕ splitmix64(stage))`.
pub fn derive_seed(seed: u64, stage: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stage))
}

/// Stage indices used by the pipeline.
pub mod stage {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const WEIGHTS: u64 = 3;
    pub const SHUFFLE: u64 = 4;
}
