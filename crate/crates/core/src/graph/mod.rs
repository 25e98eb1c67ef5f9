//! Bipartite compatibility graphs between dispatchers and servers.

mod audit;
mod io;

pub use audit::{condition1_report, default_test_sets, sparsity_probe, Condition1Report, ReportFlag, SparsityReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::rounding::largest_remainder;

/// Concrete compatibility graph. Server ids are `0..N`, dispatcher ids `0..W`.
/// Adjacency lists are sorted and duplicate free; `reverse` is their exact transpose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatibilityGraph {
    server_type: Vec<usize>,
    dispatcher_type: Vec<usize>,
    adjacency: Vec<Vec<u32>>,
    reverse: Vec<Vec<u32>>,
    servers_by_type: Vec<Vec<u32>>,
    dispatchers_by_type: Vec<Vec<u32>>,
}

impl CompatibilityGraph {
    /// Builds a graph from type maps and an edge list `(dispatcher, server)`.
    /// Duplicate edges are merged. `num_types` gives `(K, M)`.
    pub fn from_edges(
        server_type: Vec<usize>,
        dispatcher_type: Vec<usize>,
        num_types: (usize, usize),
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let (k_types, m_types) = num_types;
        let n = server_type.len();
        let w = dispatcher_type.len();
        if let Some(&t) = server_type.iter().find(|&&t| t >= m_types) {
            return Err(Error::InvalidParams(format!("server type {t} out of range")));
        }
        if let Some(&t) = dispatcher_type.iter().find(|&&t| t >= k_types) {
            return Err(Error::InvalidParams(format!("dispatcher type {t} out of range")));
        }
        let mut adjacency = vec![Vec::new(); w];
        for (i, j) in edges {
            if i >= w || j >= n {
                return Err(Error::InvalidParams(format!("edge ({i}, {j}) out of range")));
            }
            adjacency[i].push(j as u32);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::assemble(server_type, dispatcher_type, num_types, adjacency))
    }

    fn assemble(
        server_type: Vec<usize>,
        dispatcher_type: Vec<usize>,
        (k_types, m_types): (usize, usize),
        adjacency: Vec<Vec<u32>>,
    ) -> Self {
        let mut reverse = vec![Vec::new(); server_type.len()];
        for (i, list) in adjacency.iter().enumerate() {
            for &j in list {
                reverse[j as usize].push(i as u32);
            }
        }
        let mut servers_by_type = vec![Vec::new(); m_types];
        for (j, &m) in server_type.iter().enumerate() {
            servers_by_type[m].push(j as u32);
        }
        let mut dispatchers_by_type = vec![Vec::new(); k_types];
        for (i, &k) in dispatcher_type.iter().enumerate() {
            dispatchers_by_type[k].push(i as u32);
        }
        Self { server_type, dispatcher_type, adjacency, reverse, servers_by_type, dispatchers_by_type }
    }

    /// Complete bipartite graph with type counts apportioned like [`irg_sample`].
    pub fn complete(params: &SystemParams, n: usize) -> Self {
        let (server_type, dispatcher_type) = type_maps(params, n);
        let all: Vec<u32> = (0..n as u32).collect();
        let adjacency = vec![all; dispatcher_type.len()];
        Self::assemble(server_type, dispatcher_type, (params.k(), params.m()), adjacency)
    }

    pub fn num_servers(&self) -> usize {
        self.server_type.len()
    }

    pub fn num_dispatchers(&self) -> usize {
        self.dispatcher_type.len()
    }

    pub fn num_server_types(&self) -> usize {
        self.servers_by_type.len()
    }

    pub fn num_dispatcher_types(&self) -> usize {
        self.dispatchers_by_type.len()
    }

    pub fn server_type(&self, j: usize) -> usize {
        self.server_type[j]
    }

    pub fn server_types(&self) -> &[usize] {
        &self.server_type
    }

    pub fn dispatcher_type(&self, i: usize) -> usize {
        self.dispatcher_type[i]
    }

    pub fn dispatcher_types(&self) -> &[usize] {
        &self.dispatcher_type
    }

    /// Sorted compatible servers of dispatcher `i`.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    /// Sorted compatible dispatchers of server `j`.
    pub fn server_neighbors(&self, j: usize) -> &[u32] {
        &self.reverse[j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn servers_of_type(&self, m: usize) -> &[u32] {
        &self.servers_by_type[m]
    }

    pub fn dispatchers_of_type(&self, k: usize) -> &[u32] {
        &self.dispatchers_by_type[k]
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().map(move |&j| (i, j as usize)))
    }

    /// Number of type-`m` neighbors of dispatcher `i`.
    pub fn degree_to_type(&self, i: usize, m: usize) -> usize {
        self.adjacency[i].iter().filter(|&&j| self.server_type[j as usize] == m).count()
    }
}

/// Server and dispatcher type maps for `n` servers and `round(xi * n)` dispatchers.
/// Types occupy contiguous id ranges in increasing type order.
pub fn type_maps(params: &SystemParams, n: usize) -> (Vec<usize>, Vec<usize>) {
    let w = (params.xi() * n as f64).round() as usize;
    let expand = |counts: Vec<usize>| -> Vec<usize> {
        counts.iter().enumerate().flat_map(|(t, &c)| std::iter::repeat_n(t, c)).collect()
    };
    (
        expand(largest_remainder(n, params.v())),
        expand(largest_remainder(w, params.w())),
    )
}

/// Samples an inhomogeneous random bipartite graph: each dispatcher-server pair of
/// types `(k, m)` is joined independently with probability `p[k][m]`.
pub fn irg_sample(params: &SystemParams, n: usize, seed: u64) -> CompatibilityGraph {
    let (server_type, dispatcher_type) = type_maps(params, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params.p();
    let adjacency = dispatcher_type
        .iter()
        .map(|&k| {
            server_type
                .iter()
                .enumerate()
                .filter(|&(_, &m)| {
                    let pk = p[k][m];
                    if pk >= 1.0 {
                        true
                    } else if pk <= 0.0 {
                        false
                    } else {
                        rng.random::<f64>() < pk
                    }
                })
                .map(|(j, _)| j as u32)
                .collect()
        })
        .collect();
    CompatibilityGraph::assemble(server_type, dispatcher_type, (params.k(), params.m()), adjacency)
}
