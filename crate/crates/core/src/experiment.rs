//! Seeded multi-replication experiments and their CSV bundles.
//!
//! Replication `r` derives its graph and event seeds from the master seed through
//! [`crate::seed`]. Replications may run in parallel; results are always folded in
//! replication order, so outputs do not depend on the execution mode.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::SimSettings;
use crate::error::{Error, Result};
use crate::graph::{irg_sample, CompatibilityGraph};
use crate::meanfield::{integrate, IntegrateOptions};
use crate::occupancy::OccupancyVector;
use crate::par::{self, Execution};
use crate::params::SystemParams;
use crate::seed;
use crate::sim::{run_coupled, simulate, MismatchCurve, Policy, RunOptions, SimState, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub n: usize,
    pub seeds: usize,
    pub horizon: f64,
    pub snapshot_dt: f64,
    pub master_seed: u64,
    pub l_max: usize,
    pub exec: Execution,
}

impl From<&SimSettings> for ExperimentSettings {
    fn from(s: &SimSettings) -> Self {
        Self {
            n: s.n,
            seeds: s.seeds,
            horizon: s.horizon,
            snapshot_dt: s.snapshot_dt,
            master_seed: s.master_seed,
            l_max: s.l_max,
            exec: Execution::default(),
        }
    }
}

impl ExperimentSettings {
    fn run_options(&self) -> RunOptions {
        RunOptions { horizon: self.horizon, snapshot_dt: self.snapshot_dt, l_max: self.l_max }
    }
}

/// Seeds of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Replication {
    pub index: u64,
    pub seed: u64,
    pub graph_seed: u64,
    pub sim_seed: u64,
}

pub fn replications(master: u64, count: usize) -> Vec<Replication> {
    (0..count as u64)
        .map(|index| {
            let s = seed::replication_seed(master, index);
            Replication { index, seed: s, graph_seed: seed::graph_seed(s), sim_seed: seed::sim_seed(s) }
        })
        .collect()
}

/// Named CSV files produced by an experiment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub files: Vec<(String, String)>,
}

impl Bundle {
    fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

fn initial_state(graph: &CompatibilityGraph, init: Option<&[Vec<f64>]>) -> Result<SimState> {
    match init {
        Some(rows) => SimState::from_pmf_rows(graph, rows),
        None => Ok(SimState::empty(graph)),
    }
}

/// Paired complete-graph versus designed-graph runs.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCompare {
    pub times: Vec<f64>,
    /// Mean queue length per server type over replications, `[m][t]`.
    pub complete: Vec<Vec<f64>>,
    pub designed: Vec<Vec<f64>>,
    /// Type-1 mean queue length at the horizon, `(complete, designed)` per replication.
    pub pairs: Vec<(f64, f64)>,
    pub replications: Vec<Replication>,
}

impl StabilityCompare {
    /// Fraction of replications where the complete graph ends with longer type-1 queues.
    pub fn win_fraction(&self) -> f64 {
        self.pairs.iter().filter(|(c, d)| c > d).count() as f64 / self.pairs.len() as f64
    }

    pub fn bundle(&self) -> Bundle {
        let mut mean = String::from("t,m,complete,designed\n");
        for (idx, t) in self.times.iter().enumerate() {
            for m in 0..self.complete.len() {
                let _ = writeln!(mean, "{t},{},{:e},{:e}", m + 1, self.complete[m][idx], self.designed[m][idx]);
            }
        }
        let mut pairs = String::from("replication,seed,complete,designed\n");
        for (rep, (c, d)) in self.replications.iter().zip(&self.pairs) {
            let _ = writeln!(pairs, "{},{},{c:e},{d:e}", rep.index, rep.seed);
        }
        let mut out = Bundle::default();
        out.add("stability_compare_mean.csv", mean);
        out.add("stability_compare_pairs.csv", pairs);
        out
    }
}

fn mean_queue_series(paths: &[Trajectory], types: usize) -> Vec<Vec<f64>> {
    let steps = paths[0].times.len();
    (0..types)
        .map(|m| {
            (0..steps)
                .map(|i| paths.iter().map(|p| p.snapshots[i].mean_queue_len(m)).sum::<f64>() / paths.len() as f64)
                .collect()
        })
        .collect()
}

/// JSQ(d) on the complete graph against JSQ(d) on an IRG sampled from
/// `params.p()`, with the same event seed in each pair.
pub fn stability_compare(params: &SystemParams, init: Option<&[Vec<f64>]>, s: &ExperimentSettings) -> Result<StabilityCompare> {
    let complete_params = params.complete();
    let complete_graph = CompatibilityGraph::complete(&complete_params, s.n);
    let reps = replications(s.master_seed, s.seeds);
    let opts = s.run_options();
    let runs = collect(par::map(s.exec, &reps, |rep| {
        let a = simulate(&complete_graph, &complete_params, Policy::JsqD, initial_state(&complete_graph, init)?, &opts, rep.sim_seed)?;
        let g = irg_sample(params, s.n, rep.graph_seed);
        let b = simulate(&g, params, Policy::JsqD, initial_state(&g, init)?, &opts, rep.sim_seed)?;
        Ok((a.trajectory, b.trajectory))
    }))?;
    let (complete, designed): (Vec<Trajectory>, Vec<Trajectory>) = runs.into_iter().unzip();
    let pairs = complete
        .iter()
        .zip(&designed)
        .map(|(a, b)| (a.last().unwrap().mean_queue_len(0), b.last().unwrap().mean_queue_len(0)))
        .collect();
    Ok(StabilityCompare {
        times: complete[0].times.clone(),
        complete: mean_queue_series(&complete, params.m()),
        designed: mean_queue_series(&designed, params.m()),
        pairs,
        replications: reps,
    })
}

/// Mean simulated paths at several system sizes against the ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub ns: Vec<usize>,
    pub means: Vec<Trajectory>,
    pub ode: Trajectory,
    /// Compared coordinates `(m, l)`.
    pub coords: Vec<(usize, usize)>,
    /// `sup_errors[i][c]`: sup over the grid of `|mean - ode|` at size `ns[i]`, coordinate `c`.
    pub sup_errors: Vec<Vec<f64>>,
}

impl Convergence {
    pub fn bundle(&self) -> Bundle {
        let mut out = Bundle::default();
        for (n, mean) in self.ns.iter().zip(&self.means) {
            out.add(format!("convergence_sim_N{n}.csv"), mean.to_csv());
        }
        out.add("convergence_ode.csv", self.ode.to_csv());
        let mut errs = String::from("N,m,l,sup_error\n");
        for (n, row) in self.ns.iter().zip(&self.sup_errors) {
            for (&(m, l), e) in self.coords.iter().zip(row) {
                let _ = writeln!(errs, "{n},{},{l},{e:e}", m + 1);
            }
        }
        out.add("convergence_errors.csv", errs);
        out
    }
}

/// Runs `s.seeds` JSQ(d) replications on fresh IRG samples for every size in `ns`
/// and compares `q[m][1]`, `q[m][2]` of the mean path with the ODE from the same
/// initial pmfs.
pub fn convergence(params: &SystemParams, init: &[Vec<f64>], ns: &[usize], s: &ExperimentSettings) -> Result<Convergence> {
    let q0 = OccupancyVector::from_pmf_rows(init, s.l_max)?;
    let ode = integrate(&q0, s.horizon, params, &IntegrateOptions { step: 1e-3, sample_dt: s.snapshot_dt })?.trajectory;
    let coords: Vec<(usize, usize)> = (0..params.m()).flat_map(|m| [(m, 1), (m, 2)]).collect();
    let reps = replications(s.master_seed, s.seeds);
    let opts = s.run_options();
    let mut means = Vec::with_capacity(ns.len());
    let mut sup_errors = Vec::with_capacity(ns.len());
    for &n in ns {
        let paths = collect(par::map(s.exec, &reps, |rep| {
            let g = irg_sample(params, n, rep.graph_seed);
            Ok(simulate(&g, params, Policy::JsqD, SimState::from_pmf_rows(&g, init)?, &opts, rep.sim_seed)?.trajectory)
        }))?;
        let mean = Trajectory::mean(&paths)?;
        if mean.times.len() != ode.times.len() {
            return Err(Error::InvalidParams("simulation and ODE grids differ".into()));
        }
        sup_errors.push(coords.iter().map(|&c| mean.sup_gap(&ode, &[c])).collect());
        means.push(mean);
    }
    Ok(Convergence { ns: ns.to_vec(), means, ode, coords, sup_errors })
}

/// ODE paths from several initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Uniqueness {
    pub names: Vec<String>,
    pub trajectories: Vec<Trajectory>,
    /// `q[m][1]` at the horizon, `[init][m]`.
    pub endpoints: Vec<Vec<f64>>,
}

impl Uniqueness {
    /// Largest difference between endpoints of the same type.
    pub fn spread(&self) -> f64 {
        let types = self.endpoints.first().map_or(0, Vec::len);
        (0..types)
            .map(|m| {
                let xs = self.endpoints.iter().map(|e| e[m]);
                xs.clone().fold(f64::NEG_INFINITY, f64::max) - xs.fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    pub fn bundle(&self) -> Bundle {
        let mut out = Bundle::default();
        for (name, tr) in self.names.iter().zip(&self.trajectories) {
            out.add(format!("uniqueness_{name}.csv"), tr.to_csv());
        }
        let mut ends = String::from("init,m,q1\n");
        for (name, row) in self.names.iter().zip(&self.endpoints) {
            for (m, x) in row.iter().enumerate() {
                let _ = writeln!(ends, "{name},{},{x:e}", m + 1);
            }
        }
        out.add("uniqueness_endpoints.csv", ends);
        out
    }
}

pub fn uniqueness(
    params: &SystemParams,
    inits: &[(String, Vec<Vec<f64>>)],
    horizon: f64,
    sample_dt: f64,
    l_max: usize,
    exec: Execution,
) -> Result<Uniqueness> {
    let sols = collect(par::map(exec, inits, |(_, rows)| {
        let q0 = OccupancyVector::from_pmf_rows(rows, l_max)?;
        Ok(integrate(&q0, horizon, params, &IntegrateOptions { step: 1e-3, sample_dt })?.trajectory)
    }))?;
    let endpoints = sols
        .iter()
        .map(|tr| (0..params.m()).map(|m| tr.last().unwrap().get(m, 1)).collect())
        .collect();
    Ok(Uniqueness { names: inits.iter().map(|(n, _)| n.clone()).collect(), trajectories: sols, endpoints })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSummary {
    pub replication: u64,
    pub seed: u64,
    pub delta: u64,
    pub max_gap: u64,
    pub events: u64,
}

/// Coupled JSQ(d)/GWSQ(d) runs at several sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStudy {
    pub ns: Vec<usize>,
    pub runs: Vec<Vec<CouplingSummary>>,
    /// Mismatch curve of the first replication at each size.
    pub curves: Vec<MismatchCurve>,
}

impl CouplingStudy {
    /// Mean `Delta(T) / N` over replications, per size.
    pub fn mean_ratio(&self) -> Vec<f64> {
        self.ns
            .iter()
            .zip(&self.runs)
            .map(|(&n, runs)| runs.iter().map(|r| r.delta as f64 / n as f64).sum::<f64>() / runs.len() as f64)
            .collect()
    }

    pub fn bundle(&self) -> Bundle {
        let mut out = Bundle::default();
        for (n, c) in self.ns.iter().zip(&self.curves) {
            out.add(format!("coupling_mismatch_N{n}.csv"), c.to_csv());
        }
        let mut summary = String::from("N,replication,seed,delta,delta_over_N,max_gap,events\n");
        for (&n, runs) in self.ns.iter().zip(&self.runs) {
            for r in runs {
                let _ = writeln!(
                    summary,
                    "{n},{},{},{},{:e},{},{}",
                    r.replication,
                    r.seed,
                    r.delta,
                    r.delta as f64 / n as f64,
                    r.max_gap,
                    r.events
                );
            }
        }
        out.add("coupling_summary.csv", summary);
        out
    }
}

pub fn coupling(params: &SystemParams, init: Option<&[Vec<f64>]>, ns: &[usize], s: &ExperimentSettings) -> Result<CouplingStudy> {
    let reps = replications(s.master_seed, s.seeds);
    let opts = s.run_options();
    let mut runs = Vec::new();
    let mut curves = Vec::new();
    for &n in ns {
        let results = collect(par::map(s.exec, &reps, |rep| {
            let g = irg_sample(params, n, rep.graph_seed);
            run_coupled(&g, params, &initial_state(&g, init)?, &opts, rep.sim_seed)
        }))?;
        curves.push(results[0].mismatch.clone());
        runs.push(
            reps.iter()
                .zip(&results)
                .map(|(rep, r)| CouplingSummary {
                    replication: rep.index,
                    seed: rep.seed,
                    delta: r.mismatch.delta.last().copied().unwrap_or(0),
                    max_gap: r.max_gap,
                    events: r.events,
                })
                .collect(),
        );
    }
    Ok(CouplingStudy { ns: ns.to_vec(), runs, curves })
}
