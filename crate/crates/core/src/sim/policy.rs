//! Task assignment: local JSQ(d), the global GWSQ(d) variant, and the closed-form
//! class probabilities of both.

use rand::seq::index;
use rand::Rng;

use crate::binomial::gen_binom;
use crate::distribution::{gwqd, ClassDist};
use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::params::SystemParams;
use crate::rounding::largest_remainder;
use crate::sim::state::SimState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    JsqD,
    GwsqD,
}

impl Policy {
    pub fn tag(self) -> &'static str {
        match self {
            Policy::JsqD => "jsq_d",
            Policy::GwsqD => "gwsq_d",
        }
    }
}

/// Local JSQ(d) at dispatcher `i`. Returns `None` for an empty neighborhood.
pub fn jsq_d_assign<R: Rng + ?Sized>(
    state: &SimState,
    graph: &CompatibilityGraph,
    params: &SystemParams,
    i: usize,
    rng: &mut R,
) -> Option<usize> {
    let nbrs = graph.neighbors(i);
    let d = params.d();
    match nbrs.len() {
        0 => None,
        deg if deg < d => Some(nbrs[rng.random_range(0..deg)] as usize),
        deg => {
            let mut best = u32::MAX;
            let mut ties: Vec<usize> = Vec::with_capacity(d);
            for idx in index::sample(rng, deg, d) {
                let j = nbrs[idx] as usize;
                let x = state.len_of(j);
                if x < best {
                    best = x;
                    ties.clear();
                }
                if x == best {
                    ties.push(j);
                }
            }
            Some(ties[rng.random_range(0..ties.len())])
        }
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

/// Probability that the shortest of `d` draws without replacement from a pool of
/// `pool_size` pseudo-servers, distributed over classes by `dist`, falls in each
/// class (ties broken uniformly among the sampled minimizers):
///
/// `p_{m,l} = sum_{r=1}^{d} sum_{r1=1}^{r} (r1/r) C(S x_{m,l}, r1) C(S x_{-m,l}, r-r1) C(S x_{>l}, d-r) / C(S, d)`.
///
/// Class counts `S x` within 1e-9 of an integer are snapped to it. The result is
/// a pmf whenever those counts are integral.
pub fn assignment_class_pmf(dist: &ClassDist, pool_size: f64, d: usize) -> Result<ClassDist> {
    if pool_size < d as f64 {
        return Err(Error::PoolTooSmall { pool: pool_size, d });
    }
    let (types, levels) = (dist.types(), dist.levels());
    let level_mass: Vec<f64> = (0..levels).map(|l| (0..types).map(|m| dist.get(m, l)).sum()).collect();
    let mut above = vec![0.0; levels];
    for l in (0..levels.saturating_sub(1)).rev() {
        above[l] = above[l + 1] + level_mass[l + 1];
    }
    let total = gen_binom(snap(pool_size), d);
    Ok(ClassDist::from_fn(types, levels, |m, l| {
        let own = snap(pool_size * dist.get(m, l));
        if own < 1.0 {
            return 0.0;
        }
        let rest = snap(pool_size * (level_mass[l] - dist.get(m, l)).max(0.0));
        let higher = snap(pool_size * above[l]);
        let mut acc = 0.0;
        for r in 1..=d {
            let tail = gen_binom(higher, d - r);
            if tail == 0.0 {
                continue;
            }
            for r1 in 1..=r {
                acc += (r1 as f64 / r as f64) * gen_binom(own, r1) * gen_binom(rest, r - r1) * tail;
            }
        }
        acc / total
    }))
}

/// Pool of `N` pseudo-servers allocated to classes by largest-remainder rounding of
/// `N x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoPool {
    types: usize,
    levels: usize,
    counts: Vec<usize>,
}

impl PseudoPool {
    pub fn new(dist: &ClassDist, size: usize) -> Self {
        let weights: Vec<f64> = dist.iter().map(|(_, x)| x).collect();
        Self { types: dist.types(), levels: dist.levels(), counts: largest_remainder(size, &weights) }
    }

    pub fn size(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, m: usize, l: usize) -> usize {
        self.counts[m * self.levels + l]
    }

    /// Pool as a class pmf.
    pub fn to_dist(&self) -> ClassDist {
        let n = self.size() as f64;
        ClassDist::from_fn(self.types, self.levels, |m, l| self.count(m, l) as f64 / n)
    }

    fn class_of_slot(&self, mut slot: usize) -> (usize, usize) {
        for (idx, &c) in self.counts.iter().enumerate() {
            if slot < c {
                return (idx / self.levels, idx % self.levels);
            }
            slot -= c;
        }
        unreachable!("slot beyond pool size")
    }
}

/// Pseudo-pool for dispatcher type `k` in the current state.
pub fn gwsq_pool(state: &SimState, params: &SystemParams, k: usize) -> Result<PseudoPool> {
    let occ = state.occupancy(state.levels());
    Ok(PseudoPool::new(&gwqd(&occ, k, params)?, state.num_servers()))
}

/// Outcome of one GWSQ(d) draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GwsqChoice {
    /// Class selected by the pseudo-pool draw.
    pub class: (usize, usize),
    pub server: usize,
    /// Queue length of `server`; differs from `class.1` after a fallback.
    pub level: usize,
    pub fallback: bool,
}

/// GWSQ(d) for a type-`k` dispatcher: draw `d` pseudo-servers without replacement,
/// take the minimum level `l*`, pick a type with probability proportional to its
/// number of draws at `l*`, then a uniform real server of that type and length.
pub fn gwsq_d_assign<R: Rng + ?Sized>(
    state: &SimState,
    params: &SystemParams,
    k: usize,
    rng: &mut R,
) -> Result<GwsqChoice> {
    let pool = gwsq_pool(state, params, k)?;
    let d = params.d();
    if pool.size() < d {
        return Err(Error::PoolTooSmall { pool: pool.size() as f64, d });
    }
    let draws: Vec<(usize, usize)> = index::sample(rng, pool.size(), d).iter().map(|s| pool.class_of_slot(s)).collect();
    let l_star = draws.iter().map(|c| c.1).min().expect("d >= 1");
    let at_min: Vec<usize> = draws.iter().filter(|c| c.1 == l_star).map(|c| c.0).collect();
    // proportional to Y_{m,l*}: a uniform draw among the minimizers
    let m = at_min[rng.random_range(0..at_min.len())];
    place_in_class(state, (m, l_star), rng)
}

/// Uniform real server in class `(m, l)`, falling back to the nearest occupied
/// length below `l`, then above.
pub(crate) fn place_in_class<R: Rng + ?Sized>(state: &SimState, class: (usize, usize), rng: &mut R) -> Result<GwsqChoice> {
    let (m, l) = class;
    if let Some(j) = state.random_in_class(m, l, rng) {
        return Ok(GwsqChoice { class, server: j as usize, level: l, fallback: false });
    }
    let lower = (0..l).rev();
    let upper = l + 1..state.levels();
    for alt in lower.chain(upper) {
        if let Some(j) = state.random_in_class(m, alt, rng) {
            return Ok(GwsqChoice { class, server: j as usize, level: alt, fallback: true });
        }
    }
    Err(Error::InvalidParams(format!("no server of type {m}")))
}
