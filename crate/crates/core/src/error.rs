use thiserror::Error;

/// Errors produced by model construction and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("insufficient service capacity: lambda*xi = {load} >= sum v_m u_m = {capacity}")]
    CapacityViolated { load: f64, capacity: f64 },

    #[error("dispatcher type {0} has zero asymptotic neighborhood (delta_k = 0)")]
    EmptyNeighborhoodType(usize),

    #[error("dispatcher {0} has an empty neighborhood")]
    EmptyNeighborhood(usize),

    #[error("exhaustive stability search supports at most {max} servers, got {n}; use subcritical_check instead")]
    TooManyServers { n: usize, max: usize },

    #[error("pool size {pool} is smaller than sample size d = {d}")]
    PoolTooSmall { pool: f64, d: usize },

    #[error("infeasible allocation: C = {c} exceeds slots*D = {cap}")]
    InfeasibleAllocation { c: u64, cap: u64 },

    #[error("distribution is not a pmf (sum = {0})")]
    NotAPmf(f64),

    #[error("ODE integration produced a non-finite value at t = {t}: {dump}")]
    NonFinite { t: f64, dump: String },

    #[error("fixed point not reached after t = {t}: drift residual {residual:e} (tol {tol:e})")]
    NoConvergence { t: f64, residual: f64, tol: f64 },

    #[error("coupling invariant violated at event {event}: sum|Q-Q'| = {gap} > 2*mismatches = {bound}")]
    CouplingViolation {
        event: usize,
        gap: u64,
        bound: u64,
        log: Vec<String>,
    },

    #[error("tail bound fails for server type {m} at level {level}: q = {value:e} > {bound:e}")]
    TailBound { m: usize, level: usize, value: f64, bound: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
