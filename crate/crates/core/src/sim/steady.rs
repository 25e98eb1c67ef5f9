//! Time-averaged occupancy of a long JSQ(d) run.

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::occupancy::{OccupancyVector, DEFAULT_L_MAX};
use crate::params::SystemParams;
use crate::sim::policy::Policy;
use crate::sim::run::{Change, Engine};
use crate::sim::state::SimState;
use crate::stability::subcritical_check;

const BATCHES: usize = 20;
/// Two-sided 95% Student t quantile with `BATCHES - 1` degrees of freedom.
const T_QUANTILE: f64 = 2.093;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyEstimate {
    pub mean: OccupancyVector,
    /// 95% confidence half-widths from batch means, laid out like `mean`.
    pub half_width: Vec<f64>,
    /// `sum_{l >= 1} qbar[m][l]` per type (the mean queue length).
    pub tail_sums: Vec<f64>,
    /// Geometric bound `r / (1 - r)` with `r = (1 + rho) / 2`, `rho` the largest
    /// per-type load. Infinite when the system is not subcritical.
    pub tail_bound: f64,
    pub subcritical: bool,
}

impl SteadyEstimate {
    pub fn half_width_at(&self, m: usize, l: usize) -> f64 {
        self.half_width[m * (self.mean.l_max() + 1) + l]
    }
}

/// Exact time integrals of the tail counts, updated lazily per `(m, l)`.
struct Integrator {
    l_max: usize,
    value: Vec<f64>,
    since: Vec<f64>,
    acc: Vec<f64>,
}

impl Integrator {
    fn new(state: &SimState, l_max: usize, t0: f64) -> Self {
        let types = state.num_types();
        let mut value = vec![0.0; types * (l_max + 1)];
        for (m, row) in state.tail_counts(l_max + 1).iter().enumerate() {
            for (l, &c) in row.iter().enumerate() {
                value[m * (l_max + 1) + l] = c as f64;
            }
        }
        let n = value.len();
        Self { l_max, value, since: vec![t0; n], acc: vec![0.0; n] }
    }

    fn bump(&mut self, m: usize, l: usize, t: f64, by: f64) {
        if l > self.l_max {
            return;
        }
        let idx = m * (self.l_max + 1) + l;
        self.acc[idx] += self.value[idx] * (t - self.since[idx]);
        self.since[idx] = t;
        self.value[idx] += by;
    }

    /// Integrals over the batch ending at `t`; resets the accumulators.
    fn flush(&mut self, t: f64) -> Vec<f64> {
        for idx in 0..self.acc.len() {
            self.acc[idx] += self.value[idx] * (t - self.since[idx]);
            self.since[idx] = t;
        }
        std::mem::replace(&mut self.acc, vec![0.0; self.value.len()])
    }
}

/// Runs JSQ(d) from the empty state, discards `[0, warmup)` and averages the
/// occupancy over `[warmup, warmup + window]` exactly. Confidence half-widths use
/// 20 batch means.
pub fn steady_state_estimate(
    graph: &CompatibilityGraph,
    params: &SystemParams,
    warmup: f64,
    window: f64,
    seed: u64,
) -> Result<SteadyEstimate> {
    if !(warmup >= 0.0) || !(window > 0.0) {
        return Err(Error::InvalidParams("warmup must be >= 0 and window > 0".into()));
    }
    let check = subcritical_check(params);
    let l_max = DEFAULT_L_MAX;
    let mut engine = Engine::new(graph, params, Policy::JsqD, SimState::empty(graph), seed)?;
    while engine.next_time() < warmup {
        engine.step()?;
    }
    let mut integ = Integrator::new(&engine.state, l_max, warmup);
    let batch_len = window / BATCHES as f64;
    let mut batches: Vec<Vec<f64>> = Vec::with_capacity(BATCHES);
    for b in 1..=BATCHES {
        let end = warmup + b as f64 * batch_len;
        while engine.next_time() < end {
            match engine.step()? {
                Change::Push { m, len } => integ.bump(m, len as usize, engine.state.time, 1.0),
                Change::Pop { m, len } => integ.bump(m, len as usize, engine.state.time, -1.0),
                Change::Dropped => {}
            }
        }
        batches.push(integ.flush(end));
    }

    let types = params.m();
    let sizes: Vec<f64> = (0..types).map(|m| engine.state.type_size(m).max(1) as f64).collect();
    let width = l_max + 1;
    let mut mean = OccupancyVector::empty(types, l_max);
    let mut half_width = vec![0.0; types * width];
    for m in 0..types {
        for l in 0..width {
            let idx = m * width + l;
            let xs: Vec<f64> = batches.iter().map(|b| b[idx] / (batch_len * sizes[m])).collect();
            let mu = xs.iter().sum::<f64>() / BATCHES as f64;
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            mean.set(m, l, if l == 0 { 1.0 } else { mu.clamp(0.0, 1.0) });
            half_width[idx] = T_QUANTILE * (var / BATCHES as f64).sqrt();
        }
    }
    let tail_sums = (0..types).map(|m| mean.row(m).iter().skip(1).sum()).collect();
    let r = (1.0 + check.max_load()) / 2.0;
    let tail_bound = if r < 1.0 { r / (1.0 - r) } else { f64::INFINITY };
    Ok(SteadyEstimate { mean, half_width, tail_sums, tail_bound, subcritical: check.subcritical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn idle_system_stays_empty() {
        let params = presets::homogeneous(0.0, 2);
        let g = CompatibilityGraph::complete(&params, 20);
        let est = steady_state_estimate(&g, &params, 1.0, 10.0, 1).unwrap();
        assert_eq!(est.mean, OccupancyVector::empty(1, DEFAULT_L_MAX));
        assert_eq!(est.tail_sums, vec![0.0]);
    }

    #[test]
    fn integrator_is_exact() {
        let s = SimState::new(vec![0, 0], 1, vec![0, 1]).unwrap();
        let mut integ = Integrator::new(&s, 3, 0.0);
        integ.bump(0, 1, 0.5, 1.0);
        integ.bump(0, 2, 0.75, 1.0);
        let acc = integ.flush(1.0);
        // Q1 = 1 on [0, .5), 2 after; Q2 = 1 on [.75, 1)
        assert!((acc[1] - 1.5).abs() < 1e-15);
        assert!((acc[2] - 0.25).abs() < 1e-15);
        assert!((acc[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_estimate_close_to_closed_form() {
        let params = presets::homogeneous(0.7, 2);
        let g = CompatibilityGraph::complete(&params, 500);
        let est = steady_state_estimate(&g, &params, 20.0, 100.0, 3).unwrap();
        assert!((est.mean.get(0, 1) - 0.7).abs() < 0.02);
        assert!((est.mean.get(0, 2) - 0.343).abs() < 0.02);
        assert!(est.half_width_at(0, 1) < 0.02);
        assert!(est.subcritical && est.tail_sums[0] < est.tail_bound);
    }
}
