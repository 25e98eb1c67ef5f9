//! Event-driven simulation of a single system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::occupancy::DEFAULT_L_MAX;
use crate::params::SystemParams;
use crate::sim::calendar::{Calendar, EventKind};
use crate::sim::policy::{gwsq_d_assign, jsq_d_assign, Policy};
use crate::sim::state::SimState;
use crate::sim::trajectory::{sample_grid, Trajectory, TrajectoryMeta};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    pub snapshot_dt: f64,
    pub l_max: usize,
}

impl RunOptions {
    pub fn new(horizon: f64, snapshot_dt: f64) -> Self {
        Self { horizon, snapshot_dt, l_max: DEFAULT_L_MAX }
    }

    fn check(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !(self.snapshot_dt > 0.0) {
            return Err(Error::InvalidParams("horizon and snapshot_dt must be positive".into()));
        }
        Ok(())
    }
}

/// What one event did to the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Change {
    /// A type-`m` server grew to length `len`.
    Push { m: usize, len: u32 },
    /// A type-`m` server shrank from length `len`.
    Pop { m: usize, len: u32 },
    Dropped,
}

/// Calendar-driven engine: one arrival clock per dispatcher and one service clock
/// per busy server. Clocks are exponential, so a pending clock never needs to be
/// resampled.
pub(crate) struct Engine<'a> {
    graph: &'a CompatibilityGraph,
    params: &'a SystemParams,
    policy: Policy,
    pub state: SimState,
    rng: ChaCha8Rng,
    calendar: Calendar,
}

impl<'a> Engine<'a> {
    pub fn new(
        graph: &'a CompatibilityGraph,
        params: &'a SystemParams,
        policy: Policy,
        state: SimState,
        seed: u64,
    ) -> Result<Self> {
        if graph.num_server_types() != params.m() || graph.num_dispatcher_types() != params.k() {
            return Err(Error::InvalidParams("graph types do not match parameters".into()));
        }
        if state.num_servers() != graph.num_servers() {
            return Err(Error::InvalidParams("state size does not match graph".into()));
        }
        let mut engine = Self { graph, params, policy, state, rng: ChaCha8Rng::seed_from_u64(seed), calendar: Calendar::default() };
        let t0 = engine.state.time;
        if params.lambda() > 0.0 {
            for i in 0..graph.num_dispatchers() {
                let t = t0 + engine.exp(params.lambda());
                engine.calendar.schedule(t, EventKind::Arrival(i as u32));
            }
        }
        for j in 0..graph.num_servers() {
            if engine.state.len_of(j) > 0 {
                engine.schedule_service(j, t0);
            }
        }
        Ok(engine)
    }

    fn exp(&mut self, rate: f64) -> f64 {
        let e: f64 = self.rng.sample(Exp1);
        e / rate
    }

    fn schedule_service(&mut self, j: usize, now: f64) {
        let t = now + self.exp(self.params.u()[self.state.server_type(j)]);
        self.calendar.schedule(t, EventKind::Departure(j as u32));
    }

    pub fn next_time(&self) -> f64 {
        self.calendar.peek_time().unwrap_or(f64::INFINITY)
    }

    /// Processes the earliest pending event.
    pub fn step(&mut self) -> Result<Change> {
        let (t, kind) = self.calendar.pop().expect("step called with an empty calendar");
        self.state.time = t;
        match kind {
            EventKind::Arrival(i) => {
                let i = i as usize;
                let next = t + self.exp(self.params.lambda());
                self.calendar.schedule(next, EventKind::Arrival(i as u32));
                let target = match self.policy {
                    Policy::JsqD => jsq_d_assign(&self.state, self.graph, self.params, i, &mut self.rng),
                    Policy::GwsqD => {
                        let k = self.graph.dispatcher_type(i);
                        let choice = gwsq_d_assign(&self.state, self.params, k, &mut self.rng)?;
                        if choice.fallback {
                            self.state.counters.fallbacks += 1;
                        }
                        Some(choice.server)
                    }
                };
                let Some(j) = target else {
                    self.state.counters.dropped += 1;
                    return Ok(Change::Dropped);
                };
                let len = self.state.push(j);
                if len == 1 {
                    self.schedule_service(j, t);
                }
                Ok(Change::Push { m: self.state.server_type(j), len })
            }
            EventKind::Departure(j) => {
                let j = j as usize;
                let len = self.state.pop(j).expect("service clock only runs on busy servers");
                if len > 1 {
                    self.schedule_service(j, t);
                }
                Ok(Change::Pop { m: self.state.server_type(j), len })
            }
        }
    }
}

/// Result of [`simulate`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub final_state: SimState,
}

/// Simulates `policy` from `init`, recording left-limit snapshots at multiples of
/// `snapshot_dt`. Deterministic in `seed`.
pub fn simulate(
    graph: &CompatibilityGraph,
    params: &SystemParams,
    policy: Policy,
    init: SimState,
    opts: &RunOptions,
    seed: u64,
) -> Result<RunOutput> {
    opts.check()?;
    let meta = TrajectoryMeta {
        n: graph.num_servers(),
        seed,
        policy: policy.tag().to_string(),
        params_hash: params.hash_hex(),
        l_max: opts.l_max,
    };
    let mut trajectory = Trajectory::new(meta);
    let mut engine = Engine::new(graph, params, policy, init, seed)?;
    for t in sample_grid(opts.horizon, opts.snapshot_dt) {
        while engine.next_time() < t {
            engine.step()?;
        }
        trajectory.push(t, engine.state.occupancy(opts.l_max));
    }
    while engine.next_time() <= opts.horizon {
        engine.step()?;
    }
    engine.state.time = opts.horizon;
    Ok(RunOutput { trajectory, final_state: engine.state })
}

/// JSQ(d) from the empty state.
pub fn run_jsq_d(
    graph: &CompatibilityGraph,
    params: &SystemParams,
    horizon: f64,
    snapshot_dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    let out = simulate(graph, params, Policy::JsqD, SimState::empty(graph), &RunOptions::new(horizon, snapshot_dt), seed)?;
    Ok(out.trajectory)
}
