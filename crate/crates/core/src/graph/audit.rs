//! Structural diagnostics for compatibility graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CompatibilityGraph;
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq)]
pub enum ReportFlag {
    /// `|W_k| * |V_m| = 0`; density is NaN.
    EmptyClass { k: usize, m: usize },
    /// Some dispatcher of type `k` has no type-`m` neighbor although edges are expected.
    ZeroDispatcherDegree { k: usize, m: usize },
    /// Some type-`m` server has no type-`k` neighbor although edges are expected.
    ZeroServerDegree { k: usize, m: usize },
    /// Dispatcher with fewer than `d` neighbors.
    LowDegree { dispatcher: usize, degree: usize },
}

/// Empirical edge densities and degree spreads per `(k, m)` pair.
#[derive(Debug, Clone)]
pub struct Condition1Report {
    pub edge_density: Vec<Vec<f64>>,
    pub degree_ratio_w: Vec<Vec<f64>>,
    pub degree_ratio_v: Vec<Vec<f64>>,
    pub flags: Vec<ReportFlag>,
}

pub fn condition1_report(graph: &CompatibilityGraph, params: &SystemParams) -> Condition1Report {
    let (kk, mm) = (graph.num_dispatcher_types(), graph.num_server_types());
    let mut flags = Vec::new();
    let mut edge_density = vec![vec![f64::NAN; mm]; kk];
    let mut degree_ratio_w = vec![vec![f64::NAN; mm]; kk];
    let mut degree_ratio_v = vec![vec![f64::NAN; mm]; kk];

    // deg_w[i][m], deg_v[j][k]
    let deg_w: Vec<Vec<usize>> = (0..graph.num_dispatchers())
        .map(|i| {
            let mut row = vec![0; mm];
            for &j in graph.neighbors(i) {
                row[graph.server_type(j as usize)] += 1;
            }
            row
        })
        .collect();
    let deg_v: Vec<Vec<usize>> = (0..graph.num_servers())
        .map(|j| {
            let mut row = vec![0; kk];
            for &i in graph.server_neighbors(j) {
                row[graph.dispatcher_type(i as usize)] += 1;
            }
            row
        })
        .collect();

    let ratio = |degrees: &mut dyn Iterator<Item = usize>, expect_edges: bool| -> (f64, bool) {
        let (mut lo, mut hi) = (usize::MAX, 0);
        for x in degrees {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if lo == 0 && (hi > 0 || expect_edges) {
            (f64::INFINITY, true)
        } else {
            (hi as f64 / lo.max(1) as f64, false)
        }
    };

    for k in 0..kk {
        let disp = graph.dispatchers_of_type(k);
        for m in 0..mm {
            let serv = graph.servers_of_type(m);
            if disp.is_empty() || serv.is_empty() {
                flags.push(ReportFlag::EmptyClass { k, m });
                continue;
            }
            let edges: usize = disp.iter().map(|&i| deg_w[i as usize][m]).sum();
            edge_density[k][m] = edges as f64 / (disp.len() * serv.len()) as f64;
            let expect = params.p().get(k).and_then(|r| r.get(m)).is_some_and(|&p| p > 0.0);
            let (rw, zw) = ratio(&mut disp.iter().map(|&i| deg_w[i as usize][m]), expect);
            let (rv, zv) = ratio(&mut serv.iter().map(|&j| deg_v[j as usize][k]), expect);
            degree_ratio_w[k][m] = rw;
            degree_ratio_v[k][m] = rv;
            if zw {
                flags.push(ReportFlag::ZeroDispatcherDegree { k, m });
            }
            if zv {
                flags.push(ReportFlag::ZeroServerDegree { k, m });
            }
        }
    }
    for i in 0..graph.num_dispatchers() {
        let degree = graph.degree(i);
        if degree < params.d() {
            flags.push(ReportFlag::LowDegree { dispatcher: i, degree });
        }
    }
    Condition1Report { edge_density, degree_ratio_w, degree_ratio_v, flags }
}

#[derive(Debug, Clone)]
pub struct SparsityReport {
    /// `fractions[s][k]`: share of type-`k` dispatchers deviating by at least `eps` on test set `s`.
    pub fractions: Vec<Vec<f64>>,
    /// Maximum over test sets, per dispatcher type.
    pub max_fraction: Vec<f64>,
}

/// For each dispatcher type and test set `U`, the fraction of dispatchers whose
/// neighborhood share in `U` differs from the type-wide edge share by at least `eps`.
/// Dispatchers with empty neighborhoods always count as deviating.
pub fn sparsity_probe(graph: &CompatibilityGraph, test_sets: &[Vec<u32>], eps: f64) -> SparsityReport {
    let kk = graph.num_dispatcher_types();
    let mut in_set = vec![false; graph.num_servers()];
    let mut fractions = Vec::with_capacity(test_sets.len());
    for set in test_sets {
        in_set.iter_mut().for_each(|x| *x = false);
        for &j in set {
            in_set[j as usize] = true;
        }
        let mut row = vec![0.0; kk];
        for (k, slot) in row.iter_mut().enumerate() {
            let disp = graph.dispatchers_of_type(k);
            if disp.is_empty() {
                continue;
            }
            let hits: Vec<usize> = disp
                .iter()
                .map(|&i| graph.neighbors(i as usize).iter().filter(|&&j| in_set[j as usize]).count())
                .collect();
            let e_u: usize = hits.iter().sum();
            let e_v: usize = disp.iter().map(|&i| graph.degree(i as usize)).sum();
            let target = if e_v == 0 { 0.0 } else { e_u as f64 / e_v as f64 };
            let deviating = disp
                .iter()
                .zip(&hits)
                .filter(|(&i, &h)| {
                    let deg = graph.degree(i as usize);
                    deg == 0 || (h as f64 / deg as f64 - target).abs() >= eps
                })
                .count();
            *slot = deviating as f64 / disp.len() as f64;
        }
        fractions.push(row);
    }
    let max_fraction = (0..kk)
        .map(|k| fractions.iter().map(|r| r[k]).fold(0.0, f64::max))
        .collect();
    SparsityReport { fractions, max_fraction }
}

/// Queue-level sets `{j : X_j >= l}` for every occupied level `l >= 1`, plus
/// `n_random` subsets that include each server independently with probability 1/2.
/// Empty sets are skipped.
pub fn default_test_sets(queue_len: &[u32], n_random: usize, seed: u64) -> Vec<Vec<u32>> {
    let max_len = queue_len.iter().copied().max().unwrap_or(0);
    let mut sets: Vec<Vec<u32>> = (1..=max_len)
        .map(|l| (0..queue_len.len() as u32).filter(|&j| queue_len[j as usize] >= l).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        let set: Vec<u32> = (0..queue_len.len() as u32).filter(|_| rng.random::<bool>()).collect();
        if !set.is_empty() {
            sets.push(set);
        }
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{irg_sample, CompatibilityGraph};
    use crate::presets;

    #[test]
    fn complete_graph_is_perfect() {
        let params = presets::reference_params();
        let g = CompatibilityGraph::complete(&params, 40);
        let r = condition1_report(&g, &params.complete());
        for k in 0..2 {
            for m in 0..3 {
                assert_eq!(r.edge_density[k][m], 1.0);
                assert_eq!(r.degree_ratio_w[k][m], 1.0);
                assert_eq!(r.degree_ratio_v[k][m], 1.0);
            }
        }
        assert!(r.flags.is_empty());

        let sets = default_test_sets(&[0, 3, 1, 2, 0, 0, 5, 1, 0, 0, 0, 0, 2, 2, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1], 20, 9);
        let s = sparsity_probe(&g, &sets, 1e-9);
        assert!(s.max_fraction.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn full_set_never_deviates() {
        let params = presets::reference_params();
        let g = irg_sample(&params, 200, 5);
        let all: Vec<u32> = (0..200).collect();
        let s = sparsity_probe(&g, &[all], 1e-12);
        assert!(s.max_fraction.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn complementary_sets_on_complete_graph() {
        let params = presets::reference_params();
        let g = CompatibilityGraph::complete(&params, 30);
        let u: Vec<u32> = (0..30).filter(|j| j % 3 == 0).collect();
        let rest: Vec<u32> = (0..30).filter(|j| j % 3 != 0).collect();
        let a = sparsity_probe(&g, &[u], 1e-12);
        let b = sparsity_probe(&g, &[rest], 1e-12);
        assert_eq!(a.fractions, b.fractions);
    }

    #[test]
    fn zero_degree_is_flagged_infinite() {
        let params = presets::homogeneous(0.5, 2);
        // two servers, two dispatchers; dispatcher 1 sees nothing
        let g = CompatibilityGraph::from_edges(vec![0, 0], vec![0, 0], (1, 1), [(0, 0), (0, 1)]).unwrap();
        let r = condition1_report(&g, &params);
        assert_eq!(r.degree_ratio_w[0][0], f64::INFINITY);
        assert!(r.flags.contains(&ReportFlag::ZeroDispatcherDegree { k: 0, m: 0 }));
        assert!(r.flags.contains(&ReportFlag::LowDegree { dispatcher: 1, degree: 0 }));
        // empty neighborhood counts as deviating
        let s = sparsity_probe(&g, &[vec![0, 1]], 0.5);
        assert_eq!(s.max_fraction[0], 0.5);
    }
}
