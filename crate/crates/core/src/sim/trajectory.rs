//! Sampled occupancy paths and their CSV form.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::occupancy::{parse_mlq, OccupancyVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryMeta {
    pub n: usize,
    pub seed: u64,
    pub policy: String,
    pub params_hash: String,
    pub l_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub times: Vec<f64>,
    pub snapshots: Vec<OccupancyVector>,
}

/// Sample grid `0, dt, 2 dt, ...` up to `horizon` inclusive (with 1e-9 slack).
pub fn sample_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let steps = (horizon / dt + 1e-9).floor() as usize;
    (0..=steps).map(|k| k as f64 * dt).collect()
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Self { meta, times: Vec::new(), snapshots: Vec::new() }
    }

    pub fn push(&mut self, t: f64, q: OccupancyVector) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.snapshots.push(q);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&OccupancyVector> {
        self.snapshots.last()
    }

    /// `q[m][l]` along the path.
    pub fn series(&self, m: usize, l: usize) -> Vec<f64> {
        self.snapshots.iter().map(|q| q.get(m, l)).collect()
    }

    /// Pointwise mean of trajectories sharing a time grid. The metadata of the
    /// first one is kept with `policy` suffixed by `_mean`.
    pub fn mean(paths: &[Trajectory]) -> Result<Trajectory> {
        let first = paths.first().ok_or_else(|| Error::InvalidParams("no trajectories to average".into()))?;
        if paths.iter().any(|p| p.times != first.times) {
            return Err(Error::InvalidParams("trajectories use different time grids".into()));
        }
        let mut meta = first.meta.clone();
        meta.policy.push_str("_mean");
        let mut out = Trajectory::new(meta);
        let inv = 1.0 / paths.len() as f64;
        for (idx, &t) in first.times.iter().enumerate() {
            let mut q = first.snapshots[idx].clone();
            for (slot, x) in q.as_mut_slice().iter_mut().enumerate() {
                *x = paths.iter().map(|p| p.snapshots[idx].as_slice()[slot]).sum::<f64>() * inv;
            }
            out.push(t, q);
        }
        Ok(out)
    }

    /// Largest `|q - q'|` over the listed coordinates and all common sample times.
    pub fn sup_gap(&self, other: &Trajectory, coords: &[(usize, usize)]) -> f64 {
        self.snapshots
            .iter()
            .zip(&other.snapshots)
            .flat_map(|(a, b)| coords.iter().map(move |&(m, l)| (a.get(m, l) - b.get(m, l)).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "# N={}", m.n);
        let _ = writeln!(out, "# seed={}", m.seed);
        let _ = writeln!(out, "# policy={}", m.policy);
        let _ = writeln!(out, "# params_hash={}", m.params_hash);
        let _ = writeln!(out, "# L_max={}", m.l_max);
        out.push_str("t,m,l,q\n");
        for (t, q) in self.times.iter().zip(&self.snapshots) {
            q.write_rows(&mut out, &format!("{t},"));
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output. Every snapshot is validated.
    pub fn from_csv(reader: impl BufRead, types: usize) -> Result<Self> {
        let mut meta = TrajectoryMeta { n: 0, seed: 0, policy: String::new(), params_hash: String::new(), l_max: 0 };
        let mut out: Option<Trajectory> = None;
        let mut current_t = f64::NAN;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let lineno = idx + 1;
            let bad = |msg: String| Error::Parse { line: lineno, msg };
            if line.is_empty() || line.starts_with("t,") {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                let (k, v) = kv.trim().split_once('=').ok_or_else(|| bad(format!("bad metadata `{line}`")))?;
                let num = |v: &str| v.parse::<u64>().map_err(|e| bad(format!("{k}: {e}")));
                match k {
                    "N" => meta.n = num(v)? as usize,
                    "seed" => meta.seed = num(v)?,
                    "policy" => meta.policy = v.to_string(),
                    "params_hash" => meta.params_hash = v.to_string(),
                    "L_max" => meta.l_max = num(v)? as usize,
                    _ => {}
                }
                continue;
            }
            let (t, rest) = line.split_once(',').ok_or_else(|| bad(format!("expected `t,m,l,q`, got `{line}`")))?;
            let t: f64 = t.parse().map_err(|_| bad(format!("bad time `{t}`")))?;
            let (m, l, x) = parse_mlq(rest).ok_or_else(|| bad(format!("expected `t,m,l,q`, got `{line}`")))?;
            let traj = out.get_or_insert_with(|| Trajectory::new(meta.clone()));
            if m == 0 || m > types || l > meta.l_max {
                return Err(bad(format!("index ({m},{l}) out of range")));
            }
            if t != current_t {
                if traj.times.last().is_some_and(|&last| t <= last) {
                    return Err(bad(format!("time {t} not increasing")));
                }
                traj.push(t, OccupancyVector::empty(types, meta.l_max));
                current_t = t;
            }
            let q = traj.snapshots.last_mut().expect("pushed above");
            // zero tails are omitted, so level 0 rows may be followed by gaps
            q.set(m - 1, l, x);
        }
        let traj = out.unwrap_or_else(|| Trajectory::new(meta));
        for (t, q) in traj.times.iter().zip(&traj.snapshots) {
            q.validate(0.0).map_err(|msg| Error::Parse { line: 0, msg: format!("snapshot at t={t}: {msg}") })?;
        }
        Ok(traj)
    }
}

/// Mismatch count `Delta(t)` of a coupled run, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchCurve {
    pub n: usize,
    pub times: Vec<f64>,
    pub delta: Vec<u64>,
}

impl MismatchCurve {
    pub fn last_ratio(&self) -> f64 {
        self.delta.last().map_or(0.0, |&x| x as f64 / self.n as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,delta,delta_over_N\n");
        for (t, d) in self.times.iter().zip(&self.delta) {
            let _ = writeln!(out, "{t},{d},{:e}", *d as f64 / self.n as f64);
        }
        out
    }
}
