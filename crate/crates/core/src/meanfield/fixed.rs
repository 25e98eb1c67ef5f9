//! Fixed point of the mean-field ODE and the identities it must satisfy.

use crate::error::{Error, Result};
use crate::meanfield::integrate::{check_finite, project, Rk4};
use crate::meanfield::{divided_difference, q_tilde};
use crate::occupancy::{OccupancyVector, DEFAULT_L_MAX};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Bound on both the l1 drift and the l1 change per unit time.
    pub tol: f64,
    pub step: f64,
    /// Integration time budget.
    pub max_time: f64,
    pub l_max: usize,
    /// Tail mass at `L_max` above which the truncation is doubled.
    pub tail_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, step: 1e-3, max_time: 2000.0, l_max: DEFAULT_L_MAX, tail_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub q: OccupancyVector,
    /// l1 norm of the drift at `q`.
    pub drift_l1: f64,
    /// Integration time used.
    pub time: f64,
}

/// Fixed point with default options and drift tolerance `tol`.
pub fn fixed_point(params: &SystemParams, tol: f64) -> Result<FixedPoint> {
    fixed_point_with(params, &FixedPointOptions { tol, ..Default::default() })
}

/// Integrates from the empty state until the drift and the per-unit-time change
/// both drop below `opts.tol` in l1. If the converged state still carries mass
/// above `tail_tol` at `L_max`, the truncation is doubled and integration resumes.
pub fn fixed_point_with(params: &SystemParams, opts: &FixedPointOptions) -> Result<FixedPoint> {
    if !params.capacity_check() {
        return Err(Error::CapacityViolated { load: params.load(), capacity: params.capacity() });
    }
    let mut l_max = opts.l_max.max(1);
    let mut q = OccupancyVector::empty(params.m(), l_max);
    let mut t = 0.0;
    loop {
        let mut rk = Rk4::new(params, l_max, opts.step);
        let mut prev = q.as_slice().to_vec();
        let mut converged = None;
        while t < opts.max_time {
            let drift_l1: f64 = rk.step(q.as_mut_slice()).iter().map(|x| x.abs()).sum();
            t += opts.step;
            check_finite(q.as_slice(), t)?;
            project(q.as_mut_slice(), l_max);
            let moved: f64 = q.as_slice().iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum::<f64>() / opts.step;
            if drift_l1 < opts.tol && moved < opts.tol {
                converged = Some(drift_l1);
                break;
            }
            prev.copy_from_slice(q.as_slice());
        }
        let Some(_) = converged else {
            let residual = rk.drift(q.as_slice()).iter().map(|x| x.abs()).sum();
            return Err(Error::NoConvergence { t, residual, tol: opts.tol });
        };
        if (0..params.m()).any(|m| q.get(m, l_max) > opts.tail_tol) {
            l_max *= 2;
            q = q.resized(l_max);
            continue;
        }
        let drift_l1 = rk.drift(q.as_slice()).iter().map(|x| x.abs()).sum();
        return Ok(FixedPoint { q, drift_l1, time: t });
    }
}

/// `|sum_m v_m u_m q[m][1] - lambda xi|`.
pub fn flow_balance_residual(q: &OccupancyVector, params: &SystemParams) -> f64 {
    let service: f64 = (0..params.m()).map(|m| params.v()[m] * params.u()[m] * q.get(m, 1)).sum();
    (service - params.load()).abs()
}

/// Residuals of `sum_m v_m u_m q[m][l] = lambda xi sum_k w_k qt[k][l-1]^d` for
/// `l = 1..=L_max` (entry `l - 1`).
pub fn level_identity_residuals(q: &OccupancyVector, params: &SystemParams) -> Vec<f64> {
    let qt = q_tilde(q, params);
    let d = params.d() as i32;
    (1..=q.l_max())
        .map(|l| {
            let service: f64 = (0..params.m()).map(|m| params.v()[m] * params.u()[m] * q.get(m, l)).sum();
            let arrivals: f64 = (0..params.k()).map(|k| params.w()[k] * qt[k][l - 1].powi(d)).sum();
            (service - params.load() * arrivals).abs()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionReport {
    pub max_residual: f64,
    /// Number of `(m, l+1)` entries re-derived.
    pub checked: usize,
    /// `(m, l)` pairs skipped because `q[m][l] <= 1e-8`.
    pub skipped: Vec<(usize, usize)>,
}

/// Threshold below which a level is not used to re-derive the next one.
pub const RECURSION_FLOOR: f64 = 1e-8;

/// Re-derives `q[m][l+1] = q[m][l] - (lambda xi / u_m)(q[m][l-1] - q[m][l]) sum_k (p_{k,m} w_k / delta_k) D_{k,l}`
/// from the stored `q[m][l-1]`, `q[m][l]` and compares with the stored value.
///
/// Run forward from level one this recursion amplifies errors roughly d-fold per
/// level, so only one step is taken at a time and levels where `q[m][l]` is at
/// most 1e-8 are skipped.
pub fn recursion_verify(q: &OccupancyVector, params: &SystemParams) -> RecursionReport {
    let qt = q_tilde(q, params);
    let d = params.d();
    let mut report = RecursionReport { max_residual: 0.0, checked: 0, skipped: Vec::new() };
    for m in 0..params.m() {
        for l in 1..q.l_max() {
            if q.get(m, l) <= RECURSION_FLOOR {
                report.skipped.push((m, l));
                continue;
            }
            let share: f64 = (0..params.k())
                .map(|k| {
                    params.p()[k][m] * params.w()[k] / params.delta()[k] * divided_difference(qt[k][l - 1], qt[k][l], d)
                })
                .sum();
            let predicted = q.get(m, l) - params.load() / params.u()[m] * (q.get(m, l - 1) - q.get(m, l)) * share;
            report.max_residual = report.max_residual.max((predicted - q.get(m, l + 1)).abs());
            report.checked += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn closed_form(lambda: f64, l_max: usize) -> OccupancyVector {
        let row: Vec<f64> = (0..=l_max).map(|l| lambda.powf(2f64.powi(l as i32) - 1.0)).collect();
        OccupancyVector::from_tails(&[row]).unwrap()
    }

    #[test]
    fn homogeneous_fixed_point() {
        let params = presets::homogeneous(0.7, 2);
        let fp = fixed_point(&params, 1e-10).unwrap();
        for l in 0..=6 {
            assert!((fp.q.get(0, l) - 0.7f64.powf(2f64.powi(l as i32) - 1.0)).abs() < 1e-6, "level {l}");
        }
        assert!(fp.drift_l1 < 1e-9);
    }

    #[test]
    fn closed_form_satisfies_identities() {
        let params = presets::homogeneous(0.7, 2);
        let q = closed_form(0.7, 12);
        assert!(flow_balance_residual(&q, &params) < 1e-15);
        assert!(level_identity_residuals(&q, &params).iter().all(|&r| r < 1e-15));
        let rec = recursion_verify(&q, &params);
        assert!(rec.max_residual < 1e-12, "{}", rec.max_residual);
        assert!(rec.checked >= 5);
        assert!(rec.skipped.contains(&(0, 11)));
    }

    #[test]
    fn light_load_is_nearly_empty() {
        let params = presets::homogeneous(1e-4, 2);
        let fp = fixed_point(&params, 1e-12).unwrap();
        assert!((fp.q.get(0, 1) - 1e-4).abs() < 1e-9);
        assert!(fp.q.get(0, 2) < 1e-11);
    }

    #[test]
    fn reference_identities() {
        let params = presets::reference_params();
        let fp = fixed_point(&params, 1e-10).unwrap();
        assert!(flow_balance_residual(&fp.q, &params) < 1e-8);
        assert!(level_identity_residuals(&fp.q, &params).iter().all(|&r| r < 1e-8));
        assert!(recursion_verify(&fp.q, &params).max_residual < 1e-5);
        let drift = crate::meanfield::drift(&fp.q, &params);
        assert!(drift.iter().flatten().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn overloaded_is_rejected() {
        let params = presets::homogeneous(1.0, 2);
        assert!(matches!(fixed_point(&params, 1e-10), Err(Error::CapacityViolated { .. })));
    }
}
