//! Mutable system state of one simulation run.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::occupancy::OccupancyVector;
use crate::rounding::largest_remainder;

/// Cumulative event counters. All are nondecreasing in time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub arrivals: u64,
    pub departures: u64,
    /// Arrivals at dispatchers without neighbors.
    pub dropped: u64,
    /// Coupled arrivals assigned to different classes in the two systems.
    pub mismatches: u64,
    /// GWSQ draws whose class had no real server.
    pub fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    queue_len: Vec<u32>,
    server_type: Vec<usize>,
    /// `buckets[m][l]`: ids of type-`m` servers with queue length exactly `l`, sorted.
    buckets: Vec<Vec<Vec<u32>>>,
    pub time: f64,
    pub counters: Counters,
}

impl SimState {
    pub fn new(server_type: Vec<usize>, types: usize, queue_len: Vec<u32>) -> Result<Self> {
        if server_type.len() != queue_len.len() {
            return Err(Error::InvalidParams("queue vector and type map differ in length".into()));
        }
        if let Some(&m) = server_type.iter().find(|&&m| m >= types) {
            return Err(Error::InvalidParams(format!("server type {m} out of range")));
        }
        let mut buckets = vec![vec![Vec::new()]; types];
        for (j, (&m, &x)) in server_type.iter().zip(&queue_len).enumerate() {
            let row: &mut Vec<Vec<u32>> = &mut buckets[m];
            if row.len() <= x as usize {
                row.resize(x as usize + 1, Vec::new());
            }
            // ids arrive in increasing order, so buckets stay sorted
            row[x as usize].push(j as u32);
        }
        Ok(Self { queue_len, server_type, buckets, time: 0.0, counters: Counters::default() })
    }

    /// All queues empty.
    pub fn empty(graph: &CompatibilityGraph) -> Self {
        let n = graph.num_servers();
        Self::new(graph.server_types().to_vec(), graph.num_server_types(), vec![0; n]).expect("consistent graph")
    }

    /// Initial state from per-type queue-length pmfs (`rows[m][l] = P(X = l)`).
    /// Type-`m` counts are rounded by largest remainder and handed out to servers in
    /// increasing id order, shortest queues first.
    pub fn from_pmf_rows(graph: &CompatibilityGraph, rows: &[Vec<f64>]) -> Result<Self> {
        let types = graph.num_server_types();
        if rows.len() != types {
            return Err(Error::InvalidParams(format!("expected {types} pmf rows, got {}", rows.len())));
        }
        let mut queue_len = vec![0u32; graph.num_servers()];
        for (m, row) in rows.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::NotAPmf(total));
            }
            let servers = graph.servers_of_type(m);
            let counts = largest_remainder(servers.len(), row);
            let mut it = servers.iter();
            for (l, &c) in counts.iter().enumerate() {
                for &j in it.by_ref().take(c) {
                    queue_len[j as usize] = l as u32;
                }
            }
        }
        Self::new(graph.server_types().to_vec(), types, queue_len)
    }

    pub fn num_servers(&self) -> usize {
        self.queue_len.len()
    }

    pub fn num_types(&self) -> usize {
        self.buckets.len()
    }

    pub fn queue_len(&self) -> &[u32] {
        &self.queue_len
    }

    pub fn len_of(&self, j: usize) -> u32 {
        self.queue_len[j]
    }

    pub fn server_type(&self, j: usize) -> usize {
        self.server_type[j]
    }

    pub fn type_size(&self, m: usize) -> usize {
        self.buckets[m].iter().map(Vec::len).sum()
    }

    /// Highest queue length present plus one.
    pub fn levels(&self) -> usize {
        self.buckets
            .iter()
            .map(|row| row.iter().rposition(|b| !b.is_empty()).map_or(1, |l| l + 1))
            .max()
            .unwrap_or(1)
    }

    /// Number of type-`m` servers with queue length exactly `l`.
    pub fn count(&self, m: usize, l: usize) -> usize {
        self.buckets[m].get(l).map_or(0, Vec::len)
    }

    /// Number of type-`m` servers with queue length at least `l`.
    pub fn count_at_least(&self, m: usize, l: usize) -> usize {
        self.buckets[m].iter().skip(l).map(Vec::len).sum()
    }

    /// Type-`m` servers of length `l`, sorted by id.
    pub fn class_members(&self, m: usize, l: usize) -> &[u32] {
        self.buckets[m].get(l).map_or(&[], |b| b.as_slice())
    }

    pub fn total_queue(&self) -> u64 {
        self.queue_len.iter().map(|&x| x as u64).sum()
    }

    fn move_server(&mut self, j: usize, from: u32, to: u32) {
        let row = &mut self.buckets[self.server_type[j]];
        let b = &mut row[from as usize];
        let pos = b.binary_search(&(j as u32)).expect("server indexed under its length");
        b.remove(pos);
        if row.len() <= to as usize {
            row.resize(to as usize + 1, Vec::new());
        }
        let b = &mut row[to as usize];
        let pos = b.binary_search(&(j as u32)).unwrap_err();
        b.insert(pos, j as u32);
        self.queue_len[j] = to;
    }

    /// Adds one task to server `j` and returns its new length.
    pub fn push(&mut self, j: usize) -> u32 {
        let x = self.queue_len[j];
        self.move_server(j, x, x + 1);
        self.counters.arrivals += 1;
        x + 1
    }

    /// Completes one task at server `j`; returns the old length, or `None` if idle.
    pub fn pop(&mut self, j: usize) -> Option<u32> {
        let x = self.queue_len[j];
        if x == 0 {
            return None;
        }
        self.move_server(j, x, x - 1);
        self.counters.departures += 1;
        Some(x)
    }

    /// Server of rank `r` (0-based) within type `m`, ordered by queue length and
    /// then by id.
    pub fn server_at_rank(&self, m: usize, mut r: usize) -> Option<u32> {
        for b in &self.buckets[m] {
            if r < b.len() {
                return Some(b[r]);
            }
            r -= b.len();
        }
        None
    }

    /// Uniform type-`m` server of length `l`.
    pub fn random_in_class<R: Rng + ?Sized>(&self, m: usize, l: usize, rng: &mut R) -> Option<u32> {
        let b = self.class_members(m, l);
        if b.is_empty() {
            None
        } else {
            Some(b[rng.random_range(0..b.len())])
        }
    }

    /// Exact integer tails `Q[m][l]` (servers with length at least `l`) for `l < levels`.
    pub fn tail_counts(&self, levels: usize) -> Vec<Vec<u64>> {
        (0..self.num_types())
            .map(|m| {
                let mut out = vec![0u64; levels];
                let mut acc = 0u64;
                for l in (0..levels.max(self.buckets[m].len())).rev() {
                    acc += self.count(m, l) as u64;
                    if l < levels {
                        out[l] = acc;
                    }
                }
                out
            })
            .collect()
    }

    /// Occupancy fractions; lengths above `l_max` are folded into `l_max`.
    pub fn occupancy(&self, l_max: usize) -> OccupancyVector {
        let counts: Vec<Vec<u32>> = self
            .buckets
            .iter()
            .map(|row| {
                let mut c = vec![0u32; l_max + 1];
                for (l, b) in row.iter().enumerate() {
                    c[l.min(l_max)] += b.len() as u32;
                }
                c
            })
            .collect();
        OccupancyVector::from_level_counts(&counts, l_max)
    }
}
