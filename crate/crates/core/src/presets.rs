//! Built-in parameter sets.
//!
//! The reference configuration has two dispatcher types, three server types with
//! rates (1, 5, 10), arrival rate 3 per dispatcher and one dispatcher per server.
//! It is also shipped as `configs/reference.toml`.

use crate::params::SystemParams;

/// Designed compatibility matrix for the reference configuration.
pub const REFERENCE_P: [[f64; 3]; 2] = [[0.05, 0.6, 1.0], [0.1, 0.7, 1.0]];

/// Initial queue-length pmfs (rows: server type, columns: length 0, 1, 2).
pub const INIT_Q: [[f64; 3]; 3] = [[0.2, 0.5, 0.3], [0.5, 0.0, 0.5], [0.9, 0.1, 0.0]];
pub const INIT_Q1: [[f64; 3]; 3] = [[0.4, 0.3, 0.3], [0.1, 0.8, 0.1], [0.3, 0.6, 0.1]];
pub const INIT_Q2: [[f64; 3]; 3] = [[0.6, 0.3, 0.1], [0.8, 0.1, 0.1], [0.7, 0.2, 0.1]];

/// Reference heterogeneous parameters with the designed matrix.
pub fn reference_params() -> SystemParams {
    SystemParams::new(
        2,
        3.0,
        1.0,
        vec![0.2, 0.8],
        vec![0.5, 0.3, 0.2],
        vec![1.0, 5.0, 10.0],
        REFERENCE_P.iter().map(|r| r.to_vec()).collect(),
    )
    .expect("reference parameters are valid")
}

/// Single-type system on the complete graph.
pub fn homogeneous(lambda: f64, d: usize) -> SystemParams {
    SystemParams::new(d, lambda, 1.0, vec![1.0], vec![1.0], vec![1.0], vec![vec![1.0]])
        .expect("homogeneous parameters are valid")
}

/// Converts a 3x3 preset matrix into row vectors.
pub fn rows(q: &[[f64; 3]; 3]) -> Vec<Vec<f64>> {
    q.iter().map(|r| r.to_vec()).collect()
}
