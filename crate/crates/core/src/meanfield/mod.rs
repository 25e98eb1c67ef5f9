//! Mean-field limit: the ODE for the occupancy, its fixed point and tail bounds.
//!
//! With `D_{k,l}` the divided difference of `x -> x^d` between `qt[k][l-1]` and
//! `qt[k][l]`, the occupancy evolves as
//!
//! `dq[m][l]/dt = -u_m (q[m][l] - q[m][l+1]) + lambda xi (q[m][l-1] - q[m][l]) sum_k (p_{k,m} w_k / delta_k) D_{k,l}`
//!
//! where `qt[k][l] = sum_m (v_m p_{k,m} / delta_k) q[m][l]` is the occupancy seen by a
//! type-`k` dispatcher and `q[m][L_max + 1] = 0`.

mod fixed;
mod integrate;
mod tail;

pub use fixed::{
    fixed_point, fixed_point_with, flow_balance_residual, level_identity_residuals, recursion_verify, FixedPoint,
    FixedPointOptions, RecursionReport,
};
pub use integrate::{integrate, IntegrateOptions, OdeSolution};
pub use tail::{certificates_csv, tail_decay_check, TailCertificate};

use crate::occupancy::OccupancyVector;
use crate::params::SystemParams;

/// Below this gap the divided difference uses its limit `d x^{d-1}`.
pub const DIVIDED_DIFFERENCE_EPS: f64 = 1e-12;

/// `(a^d - b^d) / (a - b)`, or `d a^{d-1}` when `|a - b| < 1e-12`.
pub fn divided_difference(a: f64, b: f64, d: usize) -> f64 {
    if (a - b).abs() < DIVIDED_DIFFERENCE_EPS {
        d as f64 * a.powi(d as i32 - 1)
    } else {
        (a.powi(d as i32) - b.powi(d as i32)) / (a - b)
    }
}

/// Dispatcher-type view `qt[k][l]` of an occupancy vector.
pub fn q_tilde(q: &OccupancyVector, params: &SystemParams) -> Vec<Vec<f64>> {
    (0..params.k())
        .map(|k| {
            (0..=q.l_max())
                .map(|l| (0..params.m()).map(|m| params.view_weight(k, m) * q.get(m, l)).sum())
                .collect()
        })
        .collect()
}

/// Time derivative of every `q[m][l]`, `l = 0..=L_max`.
pub fn drift(q: &OccupancyVector, params: &SystemParams) -> Vec<Vec<f64>> {
    let mut ctx = DriftCtx::new(params, q.l_max());
    let mut out = vec![0.0; q.as_slice().len()];
    ctx.eval(q.as_slice(), &mut out);
    out.chunks(q.l_max() + 1).map(<[f64]>::to_vec).collect()
}

/// Preallocated drift evaluator over flat `m`-major slices.
pub(crate) struct DriftCtx {
    types: usize,
    kinds: usize,
    l_max: usize,
    d: usize,
    load: f64,
    u: Vec<f64>,
    /// `coef[k * M + m] = p_{k,m} w_k / delta_k`
    coef: Vec<f64>,
    /// `view[k * M + m] = v_m p_{k,m} / delta_k`
    view: Vec<f64>,
    qt: Vec<f64>,
    dd: Vec<f64>,
}

impl DriftCtx {
    pub fn new(params: &SystemParams, l_max: usize) -> Self {
        let (kinds, types) = (params.k(), params.m());
        let mut coef = vec![0.0; kinds * types];
        let mut view = vec![0.0; kinds * types];
        for k in 0..kinds {
            for m in 0..types {
                coef[k * types + m] = params.p()[k][m] * params.w()[k] / params.delta()[k];
                view[k * types + m] = params.view_weight(k, m);
            }
        }
        Self {
            types,
            kinds,
            l_max,
            d: params.d(),
            load: params.load(),
            u: params.u().to_vec(),
            coef,
            view,
            qt: vec![0.0; kinds * (l_max + 1)],
            dd: vec![0.0; kinds * (l_max + 1)],
        }
    }

    pub fn eval(&mut self, q: &[f64], out: &mut [f64]) {
        let w = self.l_max + 1;
        // levels past the first all-zero column have zero drift
        let top = (0..self.types)
            .map(|m| q[m * w..(m + 1) * w].iter().rposition(|&x| x != 0.0).unwrap_or(0))
            .max()
            .unwrap_or(0);
        let active = (top + 1).min(self.l_max);
        out.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..self.kinds {
            for l in 0..=active {
                let mut acc = 0.0;
                for m in 0..self.types {
                    acc += self.view[k * self.types + m] * q[m * w + l];
                }
                self.qt[k * w + l] = acc;
            }
            for l in 1..=active {
                self.dd[k * w + l] = divided_difference(self.qt[k * w + l - 1], self.qt[k * w + l], self.d);
            }
        }
        for m in 0..self.types {
            let row = &q[m * w..(m + 1) * w];
            for l in 1..=active {
                let next = if l < self.l_max { row[l + 1] } else { 0.0 };
                let mut share = 0.0;
                for k in 0..self.kinds {
                    share += self.coef[k * self.types + m] * self.dd[k * w + l];
                }
                out[m * w + l] = -self.u[m] * (row[l] - next) + self.load * (row[l - 1] - row[l]) * share;
            }
        }
    }
}
