//! Seed splitting for replications.
//!
//! Replication `r` of a run with master seed `s` uses
//! `splitmix64(s + (r + 1) * 0x9E3779B97F4A7C15)` (wrapping). Graph and simulation
//! streams are split once more from that value so that the same replication always
//! sees the same graph no matter which policy runs on it.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `r`.
pub fn replication_seed(master: u64, r: u64) -> u64 {
    splitmix64(master.wrapping_add((r + 1).wrapping_mul(GOLDEN)))
}

/// Seed for sampling the compatibility graph of a replication.
pub fn graph_seed(rep_seed: u64) -> u64 {
    splitmix64(rep_seed ^ 0x6772_6170_6800_0000)
}

/// Seed for the event stream of a replication.
pub fn sim_seed(rep_seed: u64) -> u64 {
    splitmix64(rep_seed ^ 0x7369_6d00_0000_0000)
}
