//! Deterministic fleet-dispatch engine.
//!
//! The crate simulates a dispatch pipeline over batched trip requests:
//! candidate vehicles are picked per request ([`contextmap`]), each candidate
//! prices the insertion of the request into its own route ([`darp`]), a sparse
//! auction solves the vehicle/request assignment ([`assignment`]), and unserved
//! requests trigger a reactive rebalancing pass ([`scheduler`]). Travel times
//! come from a pluggable oracle ([`network`]). Runs are reproducible: the same
//! seed, configuration, and request stream give identical metrics.

pub mod assignment;
pub mod contextmap;
pub mod darp;
pub mod metrics;
pub mod model;
pub mod network;
pub mod scenario;
pub mod scheduler;

/// Simulation time and durations, in seconds.
pub type Secs = f64;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Builds a reproducible generator for one named random stream of a run.
///
/// Distinct subsystems draw from distinct streams so that adding draws in one
/// place never shifts the sequence seen by another.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a list of values into a single sub-seed (splitmix64 chain).
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        let mut z = acc ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        acc = z ^ (z >> 31);
    }
    acc
}
