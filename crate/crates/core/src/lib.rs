//! Early warning for egg-production curves.
//!
//! The pipeline, end to end: [`simgen`] synthesizes daily flock records with
//! injected production problems, [`flockdata`] holds the data model and the
//! per-age reference curve, [`features`] turns sliding windows into
//! six-feature patterns with a horizon-shifted target, [`svm`] trains
//! soft-margin classifiers with an SMO solver, [`eval`] runs stratified
//! flock-level cross-validation and factor sweeps, and [`stats`] compares
//! sweep levels with one-way ANOVA plus Tukey HSD letter groupings.

pub mod error;
pub mod eval;
pub mod features;
pub mod flockdata;
#[doc(hidden)]
pub mod oracles;
pub mod simgen;
pub mod stats;
pub mod svm;

pub use error::{Error, Result};

/// Mixes a master seed with a stream index into an independent sub-seed.
///
/// SplitMix64 finalizer; used everywhere a deterministic per-worker seed is
/// derived so results do not depend on scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
