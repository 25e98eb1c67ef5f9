//! Heterogeneous load balancing on bipartite compatibility graphs.
//!
//! Dispatchers of `K` types route tasks to servers of `M` types through a random
//! compatibility graph. The crate provides exact finite-system stability loads,
//! asymptotic load certificates, a discrete-event simulator for JSQ(d) and its
//! global counterpart, a synchronous coupling of the two, and the mean-field ODE
//! with its fixed point.

pub mod binomial;
pub mod config;
pub mod distribution;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod meanfield;
pub mod occupancy;
pub mod par;
pub mod params;
pub mod presets;
pub mod rounding;
pub mod seed;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use occupancy::OccupancyVector;
pub use params::SystemParams;
