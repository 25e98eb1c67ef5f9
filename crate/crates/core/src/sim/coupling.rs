//! Synchronous coupling of local JSQ(d) (system G) with GWSQ(d) (system G').
//!
//! Both systems see the same arrival epochs at each dispatcher and the same
//! departure epochs at each within-type rank (rank order: queue length, then id).
//! At an arrival a single uniform `U` picks the target class in both systems from
//! the two-segment split of `[0, 1)`: first the common mass `min(p, p')` class by
//! class, then the excess masses `p - min` and `p' - min` separately. This
//! maximizes the probability that both systems pick the same class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::distribution::{local_counts, ClassDist};
use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::params::SystemParams;
use crate::sim::policy::{assignment_class_pmf, gwsq_pool, place_in_class, Policy};
use crate::sim::run::RunOptions;
use crate::sim::state::SimState;
use crate::sim::trajectory::{sample_grid, MismatchCurve, Trajectory, TrajectoryMeta};

/// One coupled event, kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoupledEvent {
    Arrival { t: f64, dispatcher: usize, class_g: Option<(usize, usize)>, class_gp: (usize, usize) },
    Departure { t: f64, m: usize, rank: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub g: Trajectory,
    pub g_prime: Trajectory,
    pub mismatch: MismatchCurve,
    pub events: u64,
    /// Largest `sum |Q - Q'|` seen, in servers.
    pub max_gap: u64,
    pub final_g: SimState,
    pub final_g_prime: SimState,
}

/// Picks the class where the cumulative mass of `weights` (in lexicographic class
/// order) first exceeds `target`; falls back to the last positive class.
fn pick(weights: &ClassDist, target: f64) -> Option<(usize, usize)> {
    let mut acc = 0.0;
    let mut last = None;
    for (c, w) in weights.iter() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(c);
        if target < acc {
            return Some(c);
        }
    }
    last
}

/// Classes chosen in both systems by one uniform `u`.
pub fn coupled_classes(p: &ClassDist, p_prime: &ClassDist, u: f64) -> (Option<(usize, usize)>, Option<(usize, usize)>) {
    let types = p.types().max(p_prime.types());
    let levels = p.levels().max(p_prime.levels());
    let common = ClassDist::from_fn(types, levels, |m, l| p.get(m, l).min(p_prime.get(m, l)));
    let shared = common.total();
    if u < shared {
        let c = pick(&common, u);
        return (c, c);
    }
    let rest = u - shared;
    let excess = ClassDist::from_fn(types, levels, |m, l| p.get(m, l) - common.get(m, l));
    let excess_p = ClassDist::from_fn(types, levels, |m, l| p_prime.get(m, l) - common.get(m, l));
    let a = pick(&excess, rest).or_else(|| pick(&common, u));
    let b = pick(&excess_p, rest).or_else(|| pick(&common, u));
    (a, b)
}

/// Class pmf of JSQ(d) at dispatcher `i`: `None` for an empty neighborhood.
pub fn local_class_pmf(state: &SimState, graph: &CompatibilityGraph, d: usize, i: usize) -> Result<Option<ClassDist>> {
    let counts = local_counts(state.queue_len(), graph, i);
    if counts.total == 0 {
        return Ok(None);
    }
    let dist = counts.to_dist();
    if (counts.total as usize) < d {
        return Ok(Some(dist));
    }
    assignment_class_pmf(&dist, counts.total as f64, d).map(Some)
}

/// Class pmf of GWSQ(d) for dispatcher type `k`.
pub fn global_class_pmf(state: &SimState, params: &SystemParams, k: usize) -> Result<ClassDist> {
    let pool = gwsq_pool(state, params, k)?;
    assignment_class_pmf(&pool.to_dist(), pool.size() as f64, params.d())
}

fn gap(a: &SimState, b: &SimState) -> u64 {
    let levels = a.levels().max(b.levels());
    let (qa, qb) = (a.tail_counts(levels), b.tail_counts(levels));
    qa.iter().zip(&qb).flat_map(|(x, y)| x.iter().zip(y)).map(|(x, y)| x.abs_diff(*y)).sum()
}

/// Runs both systems from `init` and checks `sum_{m,l} |Q - Q'| <= 2 Delta` in
/// exact integer counts after every event. A violation aborts with the full event
/// log. Classes are compared after any GWSQ fallback, so `Delta` counts arrivals
/// whose actual `(type, length)` targets differ.
pub fn run_coupled(
    graph: &CompatibilityGraph,
    params: &SystemParams,
    init: &SimState,
    opts: &RunOptions,
    seed: u64,
) -> Result<CoupledRun> {
    if !(opts.horizon > 0.0) || !(opts.snapshot_dt > 0.0) {
        return Err(Error::InvalidParams("horizon and snapshot_dt must be positive".into()));
    }
    if init.num_servers() != graph.num_servers() || graph.num_server_types() != params.m() {
        return Err(Error::InvalidParams("state, graph and parameters disagree".into()));
    }
    let n = graph.num_servers();
    let d = params.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = init.clone();
    let mut gp = init.clone();
    let meta = |policy: Policy| TrajectoryMeta {
        n,
        seed,
        policy: policy.tag().to_string(),
        params_hash: params.hash_hex(),
        l_max: opts.l_max,
    };
    let mut tr_g = Trajectory::new(meta(Policy::JsqD));
    let mut tr_gp = Trajectory::new(meta(Policy::GwsqD));
    let mut curve = MismatchCurve { n, times: Vec::new(), delta: Vec::new() };

    let w = graph.num_dispatchers();
    let arrival_rate = params.lambda() * w as f64;
    let type_rates: Vec<f64> = (0..params.m()).map(|m| params.u()[m] * init.type_size(m) as f64).collect();
    let total_rate = arrival_rate + type_rates.iter().sum::<f64>();

    let mut log: Vec<CoupledEvent> = Vec::new();
    let mut delta: u64 = 0;
    let mut max_gap = 0u64;
    let mut t = 0.0;
    let mut events = 0u64;
    let grid = sample_grid(opts.horizon, opts.snapshot_dt);
    let mut next_snap = 0;

    loop {
        let dt: f64 = if total_rate > 0.0 { rng.sample::<f64, _>(Exp1) / total_rate } else { f64::INFINITY };
        let t_next = t + dt;
        while next_snap < grid.len() && grid[next_snap] <= t_next {
            let ts = grid[next_snap];
            tr_g.push(ts, g.occupancy(opts.l_max));
            tr_gp.push(ts, gp.occupancy(opts.l_max));
            curve.times.push(ts);
            curve.delta.push(delta);
            next_snap += 1;
        }
        if t_next > opts.horizon {
            break;
        }
        t = t_next;
        events += 1;
        let mut pick_rate = rng.random::<f64>() * total_rate;
        if pick_rate < arrival_rate {
            let i = rng.random_range(0..w);
            let k = graph.dispatcher_type(i);
            let p = local_class_pmf(&g, graph, d, i)?;
            let p_prime = global_class_pmf(&gp, params, k)?;
            let u: f64 = rng.random();
            let (class_g, class_gp) = match &p {
                Some(p) => coupled_classes(p, &p_prime, u),
                None => (None, pick(&p_prime, u)),
            };
            let class_gp = class_gp.expect("global pmf has positive mass");
            let actual_g = match class_g {
                Some((m, l)) => {
                    let members: Vec<u32> = graph
                        .neighbors(i)
                        .iter()
                        .copied()
                        .filter(|&j| g.server_type(j as usize) == m && g.len_of(j as usize) as usize == l)
                        .collect();
                    let j = members[rng.random_range(0..members.len())] as usize;
                    g.push(j);
                    Some((m, l))
                }
                None => {
                    g.counters.dropped += 1;
                    None
                }
            };
            let choice = place_in_class(&gp, class_gp, &mut rng)?;
            if choice.fallback {
                gp.counters.fallbacks += 1;
            }
            gp.push(choice.server);
            let actual_gp = (class_gp.0, choice.level);
            if actual_g != Some(actual_gp) {
                delta += 1;
            }
            log.push(CoupledEvent::Arrival { t, dispatcher: i, class_g, class_gp });
        } else {
            pick_rate -= arrival_rate;
            let mut m = 0;
            while m + 1 < type_rates.len() && pick_rate >= type_rates[m] {
                pick_rate -= type_rates[m];
                m += 1;
            }
            let rank = rng.random_range(0..init.type_size(m));
            for s in [&mut g, &mut gp] {
                if let Some(j) = s.server_at_rank(m, rank) {
                    s.pop(j as usize);
                }
            }
            log.push(CoupledEvent::Departure { t, m, rank });
        }
        g.time = t;
        gp.time = t;
        let diff = gap(&g, &gp);
        max_gap = max_gap.max(diff);
        if diff > 2 * delta {
            return Err(Error::CouplingViolation {
                event: events as usize,
                gap: diff,
                bound: 2 * delta,
                log: log.iter().map(|e| format!("{e:?}")).collect(),
            });
        }
    }
    g.counters.mismatches = delta;
    gp.counters.mismatches = delta;
    g.time = opts.horizon;
    gp.time = opts.horizon;
    Ok(CoupledRun { g: tr_g, g_prime: tr_gp, mismatch: curve, events, max_gap, final_g: g, final_g_prime: gp })
}
