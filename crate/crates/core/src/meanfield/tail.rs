//! Doubly exponential tail certificates for a fixed point.
//!
//! Write `Q_l = max_m q[m][l]` and `C = max_m lambda xi / (v_m u_m)`. The level
//! identity gives `q[m][l+1] <= (lambda xi / (v_m u_m)) (max_k qt[k][l])^d`, and
//! since `qt[k][l] <= Q_l` also `Q_{l+1} <= C Q_l^d`. Once `c(l0) = C Q_{l0}^{d-1} < 1`,
//! induction yields `q[m][l] <= b a^(d^l)` for `l >= l0` with
//! `a = c(l0)^(1 / ((d-1) d^l0))` and `b = C^(-1/(d-1))`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::meanfield::q_tilde;
use crate::occupancy::OccupancyVector;
use crate::params::SystemParams;

const REL_SLACK: f64 = 1e-6;
const ABS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TailCertificate {
    pub m: usize,
    /// First level from which the bound holds.
    pub l_m: usize,
    pub a_m: f64,
    pub b_m: f64,
    /// Largest `q[m][l+1] - (lambda xi / (v_m u_m)) (max_k qt[k][l])^d` over all
    /// levels; nonpositive when the one-step inequality holds everywhere.
    pub max_residual: f64,
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + REL_SLACK) + ABS_SLACK
}

/// Certificates for every server type, or the first violating level.
/// Requires `d >= 2`: with one sample the tail is only geometric.
pub fn tail_decay_check(q: &OccupancyVector, params: &SystemParams) -> Result<Vec<TailCertificate>> {
    let d = params.d();
    if d < 2 {
        return Err(Error::InvalidParams("doubly exponential decay needs d >= 2".into()));
    }
    let l_max = q.l_max();
    let qt = q_tilde(q, params);
    let scale: Vec<f64> = (0..params.m()).map(|m| params.load() / (params.v()[m] * params.u()[m])).collect();
    let c_big = scale.iter().copied().fold(0.0, f64::max);
    let top = |l: usize| (0..params.m()).map(|m| q.get(m, l)).fold(0.0, f64::max);
    let l0 = (0..=l_max)
        .find(|&l| c_big * top(l).powi(d as i32 - 1) < 1.0)
        .ok_or_else(|| Error::TailBound { m: 0, level: l_max, value: top(l_max), bound: 1.0 / c_big })?;
    let c0 = c_big * top(l0).powi(d as i32 - 1);
    let e = (d as f64 - 1.0) * (d as f64).powi(l0 as i32);
    let a = if c0 > 0.0 { c0.powf(1.0 / e) } else { 0.0 };
    let b = c_big.powf(-1.0 / (d as f64 - 1.0));

    let mut out = Vec::with_capacity(params.m());
    for m in 0..params.m() {
        let mut max_residual = f64::NEG_INFINITY;
        for l in 0..l_max {
            let view = (0..params.k()).map(|k| qt[k][l]).fold(0.0, f64::max);
            let bound = scale[m] * view.powi(d as i32);
            let value = q.get(m, l + 1);
            max_residual = max_residual.max(value - bound);
            if !within(value, bound) {
                return Err(Error::TailBound { m, level: l + 1, value, bound });
            }
        }
        for l in l0..=l_max {
            let bound = b * ((d as f64).powi(l as i32) * a.ln()).exp();
            let value = q.get(m, l);
            if !within(value, bound) {
                return Err(Error::TailBound { m, level: l, value, bound });
            }
        }
        out.push(TailCertificate { m, l_m: l0, a_m: a, b_m: b, max_residual });
    }
    Ok(out)
}

/// `m,l_m,a_m,b_m,max_residual` with 1-based `m`.
pub fn certificates_csv(certs: &[TailCertificate]) -> String {
    let mut out = String::from("m,l_m,a_m,b_m,max_residual\n");
    for c in certs {
        let _ = writeln!(out, "{},{},{:e},{:e},{:e}", c.m + 1, c.l_m, c.a_m, c.b_m, c.max_residual);
    }
    out
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
    fn homogeneous_certificate_is_tight() {
        let params = presets::homogeneous(0.7, 2);
        let certs = tail_decay_check(&closed_form(0.7, 10), &params).unwrap();
        // c(0) = 0.7 < 1 gives a = lambda, b = 1 / lambda: the bound is the closed form
        assert_eq!(certs[0].l_m, 0);
        assert!((certs[0].a_m - 0.7).abs() < 1e-15);
        assert!((certs[0].b_m - 1.0 / 0.7).abs() < 1e-12);
        assert!(certs[0].max_residual.abs() < 1e-15);
    }

    #[test]
    fn double_log_slope() {
        let q = closed_form(0.7, 10);
        let y = |l: usize| (-q.get(0, l).ln()).ln();
        // consecutive slopes approach log 2 as the -1 in the exponent fades
        assert!((y(6) - y(5) - 2f64.ln()).abs() < 0.02);
        assert!((y(7) - y(6) - 2f64.ln()).abs() < 0.01);
    }

    #[test]
    fn rejects_d_one_and_bad_tails() {
        let q = closed_form(0.7, 6);
        assert!(tail_decay_check(&q, &presets::homogeneous(0.7, 1)).is_err());
        let flat = OccupancyVector::from_tails(&[vec![1.0, 0.7, 0.6, 0.5]]).unwrap();
        assert!(matches!(tail_decay_check(&flat, &presets::homogeneous(0.7, 2)), Err(Error::TailBound { level: 2, .. })));
    }

    #[test]
    fn csv_layout() {
        let certs = vec![TailCertificate { m: 0, l_m: 2, a_m: 0.5, b_m: 2.0, max_residual: -1e-3 }];
        assert_eq!(certificates_csv(&certs), "m,l_m,a_m,b_m,max_residual\n1,2,5e-1,2e0,-1e-3\n");
    }
}
