//! Fixed-step RK4 with a projection onto the state space after every step.

use crate::error::{Error, Result};
use crate::meanfield::DriftCtx;
use crate::occupancy::OccupancyVector;
use crate::params::SystemParams;
use crate::sim::trajectory::{sample_grid, Trajectory, TrajectoryMeta};

/// Tails below this are flushed to zero to keep the arithmetic out of subnormals.
const FLUSH: f64 = 1e-250;
/// Projection corrections larger than this are reported.
pub const PROJECTION_REPORT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub step: f64,
    pub sample_dt: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { step: 1e-3, sample_dt: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub trajectory: Trajectory,
    /// `(t, size)` for every projection that moved a coordinate by more than 1e-7.
    pub projections: Vec<(f64, f64)>,
}

pub(crate) struct Rk4 {
    ctx: DriftCtx,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    pub h: f64,
}

impl Rk4 {
    pub fn new(params: &SystemParams, l_max: usize, h: f64) -> Self {
        let n = params.m() * (l_max + 1);
        Self { ctx: DriftCtx::new(params, l_max), k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], h }
    }

    /// Advances `q` by one step and returns the drift at the start of the step.
    pub fn step(&mut self, q: &mut [f64]) -> &[f64] {
        let h = self.h;
        let [k1, k2, k3, k4] = &mut self.k;
        self.ctx.eval(q, k1);
        for (t, (x, d)) in self.tmp.iter_mut().zip(q.iter().zip(k1.iter())) {
            *t = x + 0.5 * h * d;
        }
        self.ctx.eval(&self.tmp, k2);
        for (t, (x, d)) in self.tmp.iter_mut().zip(q.iter().zip(k2.iter())) {
            *t = x + 0.5 * h * d;
        }
        self.ctx.eval(&self.tmp, k3);
        for (t, (x, d)) in self.tmp.iter_mut().zip(q.iter().zip(k3.iter())) {
            *t = x + h * d;
        }
        self.ctx.eval(&self.tmp, k4);
        for i in 0..q.len() {
            q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        &self.k[0]
    }

    /// Drift at `q`.
    pub fn drift(&mut self, q: &[f64]) -> &[f64] {
        let [k1, ..] = &mut self.k;
        self.ctx.eval(q, k1);
        &self.k[0]
    }
}

/// Clamps to `[0, 1]`, pins level 0 at one and re-sorts each row to be
/// nonincreasing. Returns the largest single correction.
pub(crate) fn project(q: &mut [f64], l_max: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for row in q.chunks_mut(l_max + 1) {
        worst = worst.max((row[0] - 1.0).abs());
        row[0] = 1.0;
        for l in 1..row.len() {
            let x = row[l];
            let clamped = x.clamp(0.0, 1.0);
            worst = worst.max((x - clamped).abs());
            row[l] = if clamped < FLUSH { 0.0 } else { clamped };
        }
        for l in 1..row.len() {
            if row[l] > row[l - 1] {
                worst = worst.max(row[l] - row[l - 1]);
            }
        }
        row[1..].sort_by(|a, b| b.total_cmp(a));
    }
    worst
}

pub(crate) fn check_finite(q: &[f64], t: f64) -> Result<()> {
    if q.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t, dump: format!("{q:?}") })
    }
}

/// Integrates the ODE from `q0` over `[0, horizon]`, sampling every
/// `opts.sample_dt`, which must be a whole number of steps.
pub fn integrate(q0: &OccupancyVector, horizon: f64, params: &SystemParams, opts: &IntegrateOptions) -> Result<OdeSolution> {
    if q0.types() != params.m() {
        return Err(Error::InvalidParams("initial state has the wrong number of types".into()));
    }
    if !(opts.step > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidParams("step and horizon must be positive".into()));
    }
    q0.validate(1e-12).map_err(Error::InvalidParams)?;
    let per_sample = opts.sample_dt / opts.step;
    if (per_sample - per_sample.round()).abs() > 1e-6 || per_sample.round() < 1.0 {
        return Err(Error::InvalidParams("sample_dt must be a positive multiple of step".into()));
    }
    let per_sample = per_sample.round() as usize;
    let l_max = q0.l_max();
    let meta = TrajectoryMeta { n: 0, seed: 0, policy: "ode".into(), params_hash: params.hash_hex(), l_max };
    let mut trajectory = Trajectory::new(meta);
    let mut projections = Vec::new();
    let mut rk = Rk4::new(params, l_max, opts.step);
    let mut q = q0.clone();
    let grid = sample_grid(horizon, opts.sample_dt);
    trajectory.push(0.0, q.clone());
    let mut steps = 0usize;
    for &t in &grid[1..] {
        for _ in 0..per_sample {
            rk.step(q.as_mut_slice());
            steps += 1;
            let now = steps as f64 * opts.step;
            check_finite(q.as_slice(), now)?;
            let moved = project(q.as_mut_slice(), l_max);
            if moved > PROJECTION_REPORT_TOL {
                projections.push((now, moved));
            }
        }
        trajectory.push(t, q.clone());
    }
    Ok(OdeSolution { trajectory, projections })
}
