//! Stability: exact finite-N load, asymptotic subcriticality, lower-bound
//! certificates and compatibility-matrix design.

use crate::binomial::binom_u128;
use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::params::SystemParams;

/// Largest server count accepted by [`rho_exact`].
pub const EXACT_MAX_SERVERS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityMode {
    Exact,
    Asymptotic,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rho: f64,
    /// Server subset achieving the maximum (exact mode only).
    pub witness_set: Vec<usize>,
    pub mode: StabilityMode,
}

/// Exact stability load of a finite system by enumeration of all nonempty server
/// subsets `U`:
///
/// `rho = max_U (sum_{j in U} u_j)^{-1} sum_i lambda * g_i(|U ∩ N(i)|)`,
///
/// where `g_i(x) = C(x, d) / C(deg_i, d)` if `deg_i >= d` and `x / deg_i` otherwise.
/// Ties keep the numerically smallest subset mask.
pub fn rho_exact(graph: &CompatibilityGraph, params: &SystemParams) -> Result<StabilityReport> {
    let n = graph.num_servers();
    if n > EXACT_MAX_SERVERS {
        return Err(Error::TooManyServers { n, max: EXACT_MAX_SERVERS });
    }
    if n == 0 {
        return Err(Error::InvalidParams("graph has no servers".into()));
    }
    let d = params.d();
    let lambda = params.lambda();
    let rates: Vec<f64> = (0..n).map(|j| params.u()[graph.server_type(j)]).collect();
    // per dispatcher: neighbor mask and per-overlap weight table
    let dispatchers: Vec<(u32, Vec<f64>)> = (0..graph.num_dispatchers())
        .filter(|&i| graph.degree(i) > 0)
        .map(|i| {
            let deg = graph.degree(i);
            let mask = graph.neighbors(i).iter().fold(0u32, |acc, &j| acc | (1 << j));
            let table = (0..=deg)
                .map(|x| {
                    if deg >= d {
                        lambda * binom_u128(x as u64, d as u64) as f64 / binom_u128(deg as u64, d as u64) as f64
                    } else {
                        lambda * x as f64 / deg as f64
                    }
                })
                .collect();
            (mask, table)
        })
        .collect();

    let eval = |mask: u32| -> f64 {
        let service: f64 = (0..n).filter(|j| mask & (1 << j) != 0).map(|j| rates[j]).sum();
        let arrivals: f64 = dispatchers
            .iter()
            .map(|(nb, table)| table[(nb & mask).count_ones() as usize])
            .sum();
        arrivals / service
    };

    let total: u64 = 1u64 << n;
    let (rho, mask) = crate::par::max_by_blocks(1, total, 1 << 12, |m| eval(m as u32));
    let witness_set = (0..n).filter(|j| mask & (1 << j) != 0).collect();
    Ok(StabilityReport { rho, witness_set, mode: StabilityMode::Exact })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubcriticalReport {
    /// Per server type load `(lambda xi / u_m) sum_k w_k p_{k,m} / delta_k`.
    pub loads: Vec<f64>,
    pub subcritical: bool,
}

impl SubcriticalReport {
    pub fn max_load(&self) -> f64 {
        self.loads.iter().copied().fold(0.0, f64::max)
    }

    pub fn as_report(&self) -> StabilityReport {
        StabilityReport { rho: self.max_load(), witness_set: Vec::new(), mode: StabilityMode::Asymptotic }
    }
}

/// Sufficient asymptotic criterion: every per-type load below one.
pub fn subcritical_check(params: &SystemParams) -> SubcriticalReport {
    let loads: Vec<f64> = (0..params.m())
        .map(|m| {
            let share: f64 = (0..params.k())
                .map(|k| params.w()[k] * params.p()[k][m] / params.delta()[k])
                .sum();
            params.load() / params.u()[m] * share
        })
        .collect();
    let subcritical = loads.iter().all(|&r| r < 1.0);
    SubcriticalReport { loads, subcritical }
}

/// Asymptotic lower bound on the limiting load obtained from server subsets that
/// contain a fraction `alpha[m]` of each type:
///
/// `(sum_m alpha_m v_m u_m)^{-1} lambda xi sum_k w_k (sum_m alpha_m p_{k,m} v_m / delta_k)^d`.
///
/// A value above one certifies that the system cannot be subcritical.
pub fn asymptotic_load_lower_bound(params: &SystemParams, alpha: &[f64]) -> Result<f64> {
    if alpha.len() != params.m() || alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidParams("alpha must be a length-M vector in [0,1]".into()));
    }
    if alpha.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParams("alpha must not be all zero".into()));
    }
    let service: f64 = (0..params.m()).map(|m| alpha[m] * params.v()[m] * params.u()[m]).sum();
    let arrivals: f64 = (0..params.k())
        .map(|k| {
            let share: f64 = (0..params.m()).map(|m| alpha[m] * params.p()[k][m] * params.v()[m]).sum::<f64>()
                / params.delta()[k];
            params.w()[k] * share.powi(params.d() as i32)
        })
        .sum();
    Ok(params.load() * arrivals / service)
}

/// Result of [`design_p_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub p: Vec<Vec<f64>>,
    /// Routing fractions `x[k][m] = v_m p_{k,m} / delta_k`.
    pub x: Vec<Vec<f64>>,
    /// Largest per-type load of the designed matrix.
    pub rho_star: f64,
    /// Target load `lambda xi / sum_m v_m u_m`.
    pub rho0: f64,
}

/// Greedy water-filling construction of a compatibility matrix whose per-type loads
/// do not exceed `rho0 = lambda xi / sum_m v_m u_m`.
///
/// Each dispatcher type, in order, pours its demand `lambda xi w_k` into the
/// remaining server-type budgets `rho0 v_m u_m` in increasing `m`. The routing
/// fractions are then turned into a matrix row by `p_{k,m} ∝ x_{k,m} / v_m` with
/// the row maximum scaled to one and entries rounded to 12 decimals. Only `w`, `v`, `u`, `lambda`, `xi` and `d` of
/// `params` are used.
pub fn design_p_matrix(params: &SystemParams) -> Result<Design> {
    if !params.capacity_check() {
        return Err(Error::CapacityViolated { load: params.load(), capacity: params.capacity() });
    }
    let (kk, mm) = (params.k(), params.m());
    let rho0 = params.load() / params.capacity();
    let mut budget: Vec<f64> = (0..mm).map(|m| rho0 * params.v()[m] * params.u()[m]).collect();
    let mut x = vec![vec![0.0; mm]; kk];
    for k in 0..kk {
        let demand = params.load() * params.w()[k];
        if demand == 0.0 {
            // no arrivals: route proportionally to capacity
            let cap = params.capacity();
            for m in 0..mm {
                x[k][m] = params.v()[m] * params.u()[m] / cap;
            }
            continue;
        }
        let mut left = demand;
        for m in 0..mm {
            let take = budget[m].min(left);
            if take > 0.0 {
                x[k][m] = take / demand;
                budget[m] -= take;
                left -= take;
            }
        }
        // rounding residue; capacity holds so it is at most a few ulps
        if left > 1e-9 * demand {
            return Err(Error::CapacityViolated { load: params.load(), capacity: params.capacity() });
        }
        let row_sum: f64 = x[k].iter().sum();
        x[k].iter_mut().for_each(|e| *e /= row_sum);
    }
    let p: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            let ratio: Vec<f64> = row.iter().zip(params.v()).map(|(xk, v)| xk / v).collect();
            let top = ratio.iter().copied().fold(0.0, f64::max);
            // rounding keeps float noise out of the emitted matrix
            ratio.iter().map(|r| ((r / top) * 1e12).round() / 1e12).collect()
        })
        .collect();
    let designed = params.with_p(p.clone())?;
    let rho_star = subcritical_check(&designed).max_load();
    Ok(Design { p, x, rho_star, rho0 })
}

/// Maximum of `sum_i C(x_i, d)` over integer allocations with `sum_i x_i = c`,
/// `0 <= x_i <= cap` across `slots` slots: fill whole slots greedily and put the
/// remainder in one more slot.
pub fn binom_allocation_max(slots: u64, c: u64, cap: u64, d: u64) -> Result<u128> {
    if c > slots.saturating_mul(cap) {
        return Err(Error::InfeasibleAllocation { c, cap: slots.saturating_mul(cap) });
    }
    if cap == 0 {
        return Ok(0);
    }
    let full = c / cap;
    if slots > full {
        Ok(full as u128 * binom_u128(cap, d) + binom_u128(c - cap * full, d))
    } else {
        Ok(slots as u128 * binom_u128(cap, d))
    }
}
