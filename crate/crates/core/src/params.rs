//! Model parameters.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Scalar and per-type parameters of the load-balancing model.
///
/// Dispatcher types are indexed `0..K`, server types `0..M`. `delta[k]` is the
/// asymptotic fraction of servers compatible with a type-`k` dispatcher,
/// `sum_m p[k][m] v[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    d: usize,
    lambda: f64,
    xi: f64,
    w: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
    p: Vec<Vec<f64>>,
    delta: Vec<f64>,
}

impl SystemParams {
    pub fn new(
        d: usize,
        lambda: f64,
        xi: f64,
        w: Vec<f64>,
        v: Vec<f64>,
        u: Vec<f64>,
        p: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let invalid = |s: String| Err(Error::InvalidParams(s));
        if d == 0 {
            return invalid("d must be at least 1".into());
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return invalid(format!("lambda must be finite and nonnegative, got {lambda}"));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return invalid(format!("xi must be positive, got {xi}"));
        }
        check_fractions("w", &w)?;
        check_fractions("v", &v)?;
        if u.len() != v.len() {
            return invalid(format!("u has {} entries, expected M = {}", u.len(), v.len()));
        }
        if let Some(bad) = u.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return invalid(format!("service rates must be positive, got {bad}"));
        }
        if p.len() != w.len() {
            return invalid(format!("p has {} rows, expected K = {}", p.len(), w.len()));
        }
        for (k, row) in p.iter().enumerate() {
            if row.len() != v.len() {
                return invalid(format!("p row {k} has {} entries, expected M = {}", row.len(), v.len()));
            }
            if let Some(bad) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return invalid(format!("p[{k}] entry {bad} outside [0, 1]"));
            }
        }
        let delta: Vec<f64> = p
            .iter()
            .map(|row| row.iter().zip(&v).map(|(pk, vm)| pk * vm).sum())
            .collect();
        if let Some(k) = delta.iter().position(|&x| x <= 0.0) {
            return Err(Error::EmptyNeighborhoodType(k));
        }
        Ok(Self { d, lambda, xi, w, v, u, p, delta })
    }

    /// Same parameters with a different compatibility matrix.
    pub fn with_p(&self, p: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.d, self.lambda, self.xi, self.w.clone(), self.v.clone(), self.u.clone(), p)
    }

    /// Same parameters with the complete compatibility matrix (all ones).
    pub fn complete(&self) -> Self {
        self.with_p(vec![vec![1.0; self.m()]; self.k()])
            .expect("complete matrix is always valid")
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.d, lambda, self.xi, self.w.clone(), self.v.clone(), self.u.clone(), self.p.clone())
    }

    pub fn with_d(&self, d: usize) -> Result<Self> {
        Self::new(d, self.lambda, self.xi, self.w.clone(), self.v.clone(), self.u.clone(), self.p.clone())
    }

    pub fn with_u(&self, u: Vec<f64>) -> Result<Self> {
        Self::new(self.d, self.lambda, self.xi, self.w.clone(), self.v.clone(), u, self.p.clone())
    }

    /// Number of dispatcher (task) types.
    pub fn k(&self) -> usize {
        self.w.len()
    }
    /// Number of server types.
    pub fn m(&self) -> usize {
        self.v.len()
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn w(&self) -> &[f64] {
        &self.w
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn p(&self) -> &[Vec<f64>] {
        &self.p
    }
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Weight `v_m p_{k,m} / delta_k` of server type `m` in the view of dispatcher type `k`.
    pub fn view_weight(&self, k: usize, m: usize) -> f64 {
        self.v[m] * self.p[k][m] / self.delta[k]
    }

    /// Scaled total arrival rate `lambda * xi`.
    pub fn load(&self) -> f64 {
        self.lambda * self.xi
    }

    /// Scaled maximum departure rate `sum_m u_m v_m`.
    pub fn capacity(&self) -> f64 {
        self.u.iter().zip(&self.v).map(|(u, v)| u * v).sum()
    }

    /// Whether the scaled arrival rate is strictly below the scaled service capacity.
    pub fn capacity_check(&self) -> bool {
        self.load() < self.capacity()
    }

    /// Short stable digest of the parameters, used to tag output files.
    pub fn hash_hex(&self) -> String {
        let canonical = format!(
            "d={};lambda={:e};xi={:e};w={:?};v={:?};u={:?};p={:?}",
            self.d, self.lambda, self.xi, self.w, self.v, self.u, self.p
        );
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

fn check_fractions(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidParams(format!("{name} must be nonempty")));
    }
    if let Some(bad) = xs.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
        return Err(Error::InvalidParams(format!("{name} entry {bad} outside (0, 1]")));
    }
    let s: f64 = xs.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParams(format!("{name} sums to {s}, expected 1")));
    }
    Ok(())
}
