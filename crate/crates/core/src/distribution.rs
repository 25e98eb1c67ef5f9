//! Queue-length distributions over `(server type, queue length)` classes:
//! the global weighted view of a dispatcher type and the local view of one dispatcher.

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::occupancy::OccupancyVector;
use crate::params::SystemParams;

/// Dense pmf over classes `(m, l)`, `m < types`, `l < levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDist {
    types: usize,
    levels: usize,
    probs: Vec<f64>,
}

impl ClassDist {
    pub fn zeros(types: usize, levels: usize) -> Self {
        Self { types, levels, probs: vec![0.0; types * levels] }
    }

    pub fn from_fn(types: usize, levels: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(types, levels);
        for m in 0..types {
            for l in 0..levels {
                out.probs[m * levels + l] = f(m, l);
            }
        }
        out
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, m: usize, l: usize) -> f64 {
        if m < self.types && l < self.levels {
            self.probs[m * self.levels + l]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, m: usize, l: usize, x: f64) {
        self.probs[m * self.levels + l] = x;
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Classes in `(m, l)` lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(idx, &x)| ((idx / self.levels, idx % self.levels), x))
    }

    /// l1 distance; missing classes count as zero mass.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        let types = self.types.max(other.types);
        let levels = self.levels.max(other.levels);
        let mut acc = 0.0;
        for m in 0..types {
            for l in 0..levels {
                acc += (self.get(m, l) - other.get(m, l)).abs();
            }
        }
        acc
    }
}

/// Integer class counts inside one dispatcher's neighborhood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalCounts {
    pub types: usize,
    pub levels: usize,
    pub counts: Vec<u32>,
    pub total: u32,
}

impl LocalCounts {
    pub fn get(&self, m: usize, l: usize) -> u32 {
        if l < self.levels {
            self.counts[m * self.levels + l]
        } else {
            0
        }
    }

    /// Divides once by the neighborhood size.
    pub fn to_dist(&self) -> ClassDist {
        let total = self.total as f64;
        ClassDist {
            types: self.types,
            levels: self.levels,
            probs: self.counts.iter().map(|&c| c as f64 / total).collect(),
        }
    }
}

/// Global weighted queue-length distribution seen by dispatcher type `k`:
/// `x[m][l] = (v_m p_{k,m} / delta_k) (q[m][l] - q[m][l+1])`, with the tail above
/// `L_max` folded into level `L_max`.
pub fn gwqd(q: &OccupancyVector, k: usize, params: &SystemParams) -> Result<ClassDist> {
    if k >= params.k() {
        return Err(Error::InvalidParams(format!("dispatcher type {k} out of range")));
    }
    if params.delta()[k] <= 0.0 {
        return Err(Error::EmptyNeighborhoodType(k));
    }
    let l_max = q.l_max();
    Ok(ClassDist::from_fn(params.m(), l_max + 1, |m, l| {
        let mass = if l < l_max { q.get(m, l) - q.get(m, l + 1) } else { q.get(m, l_max) };
        params.view_weight(k, m) * mass
    }))
}

/// Exact class counts among dispatcher `i`'s neighbors.
pub fn local_counts(queue_len: &[u32], graph: &CompatibilityGraph, i: usize) -> LocalCounts {
    let nbrs = graph.neighbors(i);
    let levels = nbrs.iter().map(|&j| queue_len[j as usize]).max().map_or(1, |x| x as usize + 1);
    let types = graph.num_server_types();
    let mut counts = vec![0u32; types * levels];
    for &j in nbrs {
        let j = j as usize;
        counts[graph.server_type(j) * levels + queue_len[j] as usize] += 1;
    }
    LocalCounts { types, levels, counts, total: nbrs.len() as u32 }
}

/// Local queue-length distribution of dispatcher `i`.
pub fn lqd(queue_len: &[u32], graph: &CompatibilityGraph, i: usize) -> Result<ClassDist> {
    if graph.degree(i) == 0 {
        return Err(Error::EmptyNeighborhood(i));
    }
    Ok(local_counts(queue_len, graph, i).to_dist())
}

/// Empirical occupancy of a queue-length vector, deep enough that nothing is folded.
pub fn empirical_occupancy(queue_len: &[u32], graph: &CompatibilityGraph, l_max: usize) -> OccupancyVector {
    let types = graph.num_server_types();
    let mut counts = vec![vec![0u32; l_max + 1]; types];
    for (j, &x) in queue_len.iter().enumerate() {
        counts[graph.server_type(j)][(x as usize).min(l_max)] += 1;
    }
    OccupancyVector::from_level_counts(&counts, l_max)
}

/// Dispatchers whose local distribution is more than `eps` away (l1) from the
/// global weighted distribution of their type under the current occupancy.
/// Dispatchers with empty neighborhoods are reported as bad.
pub fn epsilon_bad_dispatchers(
    queue_len: &[u32],
    graph: &CompatibilityGraph,
    params: &SystemParams,
    eps: f64,
) -> Vec<usize> {
    let depth = queue_len.iter().copied().max().unwrap_or(0) as usize + 1;
    let occ = empirical_occupancy(queue_len, graph, depth);
    let globals: Vec<ClassDist> = (0..params.k())
        .map(|k| gwqd(&occ, k, params).expect("validated parameters"))
        .collect();
    (0..graph.num_dispatchers())
        .filter(|&i| match lqd(queue_len, graph, i) {
            Ok(local) => local.l1_distance(&globals[graph.dispatcher_type(i)]) > eps,
            Err(_) => true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn two_type_params() -> SystemParams {
        SystemParams::new(2, 0.5, 1.0, vec![1.0], vec![0.5, 0.5], vec![1.0, 1.0], vec![vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn gwqd_hand_example() {
        let params = two_type_params();
        let q = OccupancyVector::from_tails(&[vec![1.0, 0.4, 0.1], vec![1.0, 0.2, 0.0]]).unwrap();
        let x = gwqd(&q, 0, &params).unwrap();
        let want = [[0.3, 0.15, 0.05], [0.4, 0.1, 0.0]];
        for m in 0..2 {
            for l in 0..3 {
                assert!((x.get(m, l) - want[m][l]).abs() < 1e-15, "({m},{l})");
            }
        }
        assert!((x.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gwqd_empty_state_is_point_mass_per_type() {
        let params = presets::reference_params();
        let q = OccupancyVector::empty(3, 8);
        for k in 0..2 {
            let x = gwqd(&q, k, &params).unwrap();
            for m in 0..3 {
                assert!((x.get(m, 0) - params.view_weight(k, m)).abs() < 1e-15);
                assert_eq!(x.get(m, 1), 0.0);
            }
            assert!((x.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gwqd_homogeneous_is_plain_pmf() {
        let params = presets::homogeneous(0.5, 2);
        let q = OccupancyVector::from_tails(&[vec![1.0, 0.6, 0.25, 0.05]]).unwrap();
        let x = gwqd(&q, 0, &params).unwrap();
        assert_eq!(x.get(0, 0), 0.4);
        assert_eq!(x.get(0, 1), 0.35);
        assert_eq!(x.get(0, 2), 0.2);
        assert_eq!(x.get(0, 3), 0.05);
    }

    #[test]
    fn lqd_examples() {
        let g = CompatibilityGraph::from_edges(vec![0; 5], vec![0], (1, 1), (0..4).map(|j| (0, j))).unwrap();
        let x = lqd(&[0, 0, 1, 2, 7], &g, 0).unwrap();
        assert_eq!(x.get(0, 0), 0.5);
        assert_eq!(x.get(0, 1), 0.25);
        assert_eq!(x.get(0, 2), 0.25);
        assert_eq!(x.total(), 1.0);

        let g2 = CompatibilityGraph::from_edges(vec![0, 1], vec![0], (1, 2), [(0, 0), (0, 1)]).unwrap();
        let x2 = lqd(&[0, 0], &g2, 0).unwrap();
        assert_eq!((x2.get(0, 0), x2.get(1, 0)), (0.5, 0.5));

        let lonely = CompatibilityGraph::from_edges(vec![0], vec![0], (1, 1), std::iter::empty()).unwrap();
        assert!(matches!(lqd(&[0], &lonely, 0), Err(Error::EmptyNeighborhood(0))));
    }

    #[test]
    fn lqd_on_full_neighborhood_is_empirical_pmf() {
        let params = presets::homogeneous(0.5, 2);
        let g = CompatibilityGraph::complete(&params, 6);
        let qs = [0, 3, 1, 1, 0, 2];
        let local = lqd(&qs, &g, 2).unwrap();
        let global = gwqd(&empirical_occupancy(&qs, &g, 4), 0, &params).unwrap();
        assert!(local.l1_distance(&global) < 1e-15);
    }

    #[test]
    fn epsilon_bad_examples() {
        // 10 servers of one type: 7 empty, 3 at length one. Dispatcher 0 sees only empty ones.
        let params = presets::homogeneous(0.5, 2);
        let qs = [0, 0, 0, 0, 0, 0, 0, 1, 1, 1];
        let edges = (0..7).map(|j| (0, j)).chain((0..10).map(|j| (1, j)));
        let g = CompatibilityGraph::from_edges(vec![0; 10], vec![0, 0], (1, 1), edges).unwrap();
        // oracle: |1 - 0.7| + |0 - 0.3|
        let dist = 0.3f64 + 0.3;
        assert!((lqd(&qs, &g, 0).unwrap().l1_distance(&gwqd(&empirical_occupancy(&qs, &g, 2), 0, &params).unwrap()) - dist).abs() < 1e-12);
        assert_eq!(epsilon_bad_dispatchers(&qs, &g, &params, 0.5), vec![0]);
        assert!(epsilon_bad_dispatchers(&qs, &g, &params, 0.6 + 1e-9).is_empty());
        assert!(epsilon_bad_dispatchers(&qs, &g, &params, 2.0).is_empty());
    }
}
