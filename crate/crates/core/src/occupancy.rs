//! Occupancy vectors: per-type tail fractions `q[m][l]`, truncated at `L_max`.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

pub const DEFAULT_L_MAX: usize = 64;

/// `q[m][l]` is the fraction of type-`m` servers with queue length at least `l`,
/// for `l = 0..=l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyVector {
    types: usize,
    l_max: usize,
    q: Vec<f64>,
}

impl OccupancyVector {
    /// All servers empty.
    pub fn empty(types: usize, l_max: usize) -> Self {
        let mut q = vec![0.0; types * (l_max + 1)];
        for m in 0..types {
            q[m * (l_max + 1)] = 1.0;
        }
        Self { types, l_max, q }
    }

    /// Builds tails from per-type queue-length pmfs (`rows[m][l] = P(X = l)`).
    /// Mass beyond `l_max` is kept in the last level.
    pub fn from_pmf_rows(rows: &[Vec<f64>], l_max: usize) -> Result<Self> {
        let mut out = Self::empty(rows.len(), l_max);
        for (m, row) in rows.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|x| *x < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::NotAPmf(total));
            }
            for l in 1..=l_max {
                let tail: f64 = row.iter().skip(l).sum();
                out.set(m, l, tail.clamp(0.0, 1.0));
            }
        }
        Ok(out)
    }

    /// Builds tails from raw matrix values, validating the state-space invariants.
    pub fn from_tails(rows: &[Vec<f64>]) -> Result<Self> {
        let types = rows.len();
        let l_max = rows.first().map_or(0, |r| r.len().saturating_sub(1));
        let mut q = Vec::with_capacity(types * (l_max + 1));
        for row in rows {
            if row.len() != l_max + 1 {
                return Err(Error::InvalidParams("ragged occupancy rows".into()));
            }
            q.extend_from_slice(row);
        }
        let out = Self { types, l_max, q };
        out.validate(0.0).map_err(Error::InvalidParams)?;
        Ok(out)
    }

    /// Builds tails from per-type, per-level server counts.
    pub fn from_level_counts(counts: &[Vec<u32>], l_max: usize) -> Self {
        let mut out = Self::empty(counts.len(), l_max);
        for (m, row) in counts.iter().enumerate() {
            let total: u64 = row.iter().map(|&c| c as u64).sum();
            if total == 0 {
                continue;
            }
            let mut tail: u64 = total;
            for l in 1..=l_max {
                tail -= row.get(l - 1).copied().unwrap_or(0) as u64;
                out.set(m, l, tail as f64 / total as f64);
            }
        }
        out
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    #[inline]
    pub fn get(&self, m: usize, l: usize) -> f64 {
        if l > self.l_max {
            0.0
        } else {
            self.q[m * (self.l_max + 1) + l]
        }
    }

    #[inline]
    pub fn set(&mut self, m: usize, l: usize, value: f64) {
        self.q[m * (self.l_max + 1) + l] = value;
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.q[m * (self.l_max + 1)..(m + 1) * (self.l_max + 1)]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        let w = self.l_max + 1;
        &mut self.q[m * w..(m + 1) * w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.q
    }

    /// Copy truncated or zero-extended to a new depth. Truncation drops deeper levels.
    pub fn resized(&self, l_max: usize) -> Self {
        let mut out = Self::empty(self.types, l_max);
        for m in 0..self.types {
            for l in 1..=l_max {
                out.set(m, l, self.get(m, l));
            }
        }
        out
    }

    /// Mean queue length of type-`m` servers (sum of tails above level 0).
    pub fn mean_queue_len(&self, m: usize) -> f64 {
        self.row(m)[1..].iter().sum()
    }

    /// Checks `q[m][0] = 1`, entries in `[0, 1]` and monotone in `l`,
    /// allowing violations up to `tol`.
    pub fn validate(&self, tol: f64) -> std::result::Result<(), String> {
        for m in 0..self.types {
            let row = self.row(m);
            if (row[0] - 1.0).abs() > tol {
                return Err(format!("q[{m}][0] = {} != 1", row[0]));
            }
            for (l, &x) in row.iter().enumerate() {
                if !(x >= -tol && x <= 1.0 + tol) {
                    return Err(format!("q[{m}][{l}] = {x} outside [0, 1]"));
                }
                if l + 1 < row.len() && row[l + 1] > x + tol {
                    return Err(format!("q[{m}] not monotone at level {l}: {x} < {}", row[l + 1]));
                }
            }
        }
        Ok(())
    }

    /// Componentwise `self <= other + tol`.
    pub fn dominated_by(&self, other: &Self, tol: f64) -> bool {
        self.q.iter().zip(&other.q).all(|(a, b)| *a <= *b + tol)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        let depth = self.l_max.max(other.l_max);
        (0..self.types)
            .flat_map(|m| (0..=depth).map(move |l| (m, l)))
            .map(|(m, l)| (self.get(m, l) - other.get(m, l)).abs())
            .sum()
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        let depth = self.l_max.max(other.l_max);
        (0..self.types)
            .flat_map(|m| (0..=depth).map(move |l| (m, l)))
            .map(|(m, l)| (self.get(m, l) - other.get(m, l)).abs())
            .fold(0.0, f64::max)
    }

    /// Deepest level with a nonzero entry in any type.
    pub fn support_depth(&self) -> usize {
        (0..=self.l_max)
            .rev()
            .find(|&l| (0..self.types).any(|m| self.get(m, l) > 0.0))
            .unwrap_or(0)
    }

    /// CSV rows `m,l,q` with 1-based server types, omitting zero tails.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,l,q\n");
        self.write_rows(&mut out, "");
        out
    }

    pub(crate) fn write_rows(&self, out: &mut String, prefix: &str) {
        for m in 0..self.types {
            for (l, &x) in self.row(m).iter().enumerate() {
                if l > 0 && x == 0.0 {
                    continue;
                }
                let _ = writeln!(out, "{prefix}{},{l},{x:e}", m + 1);
            }
        }
    }

    /// Parses the output of [`to_csv`](Self::to_csv). Missing rows are zero tails.
    pub fn from_csv(reader: impl BufRead, types: usize, l_max: usize) -> Result<Self> {
        let mut out = Self::empty(types, l_max);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("m,") {
                continue;
            }
            let (m, l, x) = parse_mlq(line).ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `m,l,q`, got `{line}`"),
            })?;
            if m == 0 || m > types || l > l_max {
                return Err(Error::Parse { line: idx + 1, msg: format!("index ({m},{l}) out of range") });
            }
            out.set(m - 1, l, x);
        }
        out.validate(0.0).map_err(|msg| Error::Parse { line: 0, msg })?;
        Ok(out)
    }
}

pub(crate) fn parse_mlq(line: &str) -> Option<(usize, usize, f64)> {
    let mut it = line.split(',').map(str::trim);
    let m = it.next()?.parse().ok()?;
    let l = it.next()?.parse().ok()?;
    let q = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((m, l, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_rows_to_tails() {
        let q = OccupancyVector::from_pmf_rows(&[vec![0.2, 0.5, 0.3], vec![0.9, 0.1, 0.0]], 4).unwrap();
        assert!((q.get(0, 1) - 0.8).abs() < 1e-15);
        assert!((q.get(0, 2) - 0.3).abs() < 1e-15);
        assert_eq!(q.get(0, 3), 0.0);
        assert!((q.get(1, 1) - 0.1).abs() < 1e-15);
        assert!((q.mean_queue_len(0) - 1.1).abs() < 1e-12);
        q.validate(0.0).unwrap();
    }

    #[test]
    fn validate_rejects_non_monotone() {
        assert!(OccupancyVector::from_tails(&[vec![1.0, 0.2, 0.3]]).is_err());
        assert!(OccupancyVector::from_tails(&[vec![0.9, 0.2, 0.1]]).is_err());
        assert!(OccupancyVector::from_tails(&[vec![1.0, 0.5, 0.0]]).is_ok());
    }

    #[test]
    fn level_counts() {
        let q = OccupancyVector::from_level_counts(&[vec![2, 1, 1]], 3);
        assert_eq!(q.row(0), &[1.0, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn csv_round_trip() {
        let q = OccupancyVector::from_pmf_rows(&[vec![0.2, 0.5, 0.3], vec![0.5, 0.0, 0.5]], 6).unwrap();
        let text = q.to_csv();
        let back = OccupancyVector::from_csv(text.as_bytes(), 2, 6).unwrap();
        assert_eq!(q, back);
    }
}
