//! TOML run configuration.
//!
//! ```toml
//! [model]
//! K = 2
//! M = 3
//! d = 2
//! xi = 1.0
//!
//! [rates]
//! lambda = 3.0
//! u = [1.0, 5.0, 10.0]
//!
//! [fractions]
//! w = [0.2, 0.8]
//! v = [0.5, 0.3, 0.2]
//!
//! [compat]            # optional, defaults to all ones
//! p = [0.05, 0.6, 1.0, 0.1, 0.7, 1.0]   # row-major K x M
//!
//! [init]              # optional, rows are pmfs over lengths 0, 1, 2, ...
//! Q = [0.2, 0.5, 0.3, 0.5, 0.0, 0.5, 0.9, 0.1, 0.0]
//!
//! [sim]               # optional
//! N = 1000
//! horizon = 2.5
//! seeds = 100
//! ```
//!
//! Errors carry the line of the offending key.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::occupancy::DEFAULT_L_MAX;
use crate::params::SystemParams;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    rates: RawRates,
    fractions: RawFractions,
    compat: Option<RawCompat>,
    init: Option<RawInit>,
    sim: Option<RawSim>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    d: usize,
    #[serde(default = "one")]
    xi: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    lambda: f64,
    u: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFractions {
    w: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompat {
    p: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    #[serde(rename = "Q")]
    q: Option<Vec<f64>>,
    #[serde(rename = "Q1")]
    q1: Option<Vec<f64>>,
    #[serde(rename = "Q2")]
    q2: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(rename = "N")]
    n: Option<usize>,
    horizon: Option<f64>,
    seeds: Option<usize>,
    master_seed: Option<u64>,
    snapshot_dt: Option<f64>,
    #[serde(rename = "L_max")]
    l_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub n: usize,
    pub horizon: f64,
    pub seeds: usize,
    pub master_seed: u64,
    pub snapshot_dt: f64,
    pub l_max: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { n: 1000, horizon: 2.5, seeds: 100, master_seed: 1, snapshot_dt: 0.1, l_max: DEFAULT_L_MAX }
    }
}

/// Named initial queue-length pmf matrices (`rows[m][l] = P(X = l)`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitConditions {
    pub named: Vec<(String, Vec<Vec<f64>>)>,
}

impl InitConditions {
    pub fn get(&self, name: &str) -> Option<&Vec<Vec<f64>>> {
        self.named.iter().find(|(n, _)| n == name).map(|(_, rows)| rows)
    }

    /// `Q` if present, else the first matrix given.
    pub fn primary(&self) -> Option<&Vec<Vec<f64>>> {
        self.get("Q").or_else(|| self.named.first().map(|(_, r)| r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: SystemParams,
    pub init: InitConditions,
    pub sim: SimSettings,
}

/// 1-based line of `key = ...` inside `[section]`, or of the section header when
/// the key is absent.
fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut in_section = false;
    let mut header = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('[') {
            in_section = line.trim_start_matches('[').trim_end_matches(']').trim() == section;
            if in_section {
                header = idx + 1;
            }
            continue;
        }
        if in_section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return idx + 1;
                }
            }
        }
    }
    header
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn reshape(flat: &[f64], rows: usize, cols: usize) -> Option<Vec<Vec<f64>>> {
    (flat.len() == rows * cols && cols > 0).then(|| flat.chunks(cols).map(<[f64]>::to_vec).collect())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of_offset(text, s.start)),
            msg: e.message().to_string(),
        })?;
        let at = |section: &str, key: &str, msg: String| Error::Parse { line: locate(text, section, key), msg };
        let (k, m) = (raw.model.k, raw.model.m);
        if raw.fractions.w.len() != k {
            return Err(at("fractions", "w", format!("w has {} entries, expected K = {k}", raw.fractions.w.len())));
        }
        if raw.fractions.v.len() != m {
            return Err(at("fractions", "v", format!("v has {} entries, expected M = {m}", raw.fractions.v.len())));
        }
        if raw.rates.u.len() != m {
            return Err(at("rates", "u", format!("u has {} entries, expected M = {m}", raw.rates.u.len())));
        }
        let p = match &raw.compat {
            Some(c) => reshape(&c.p, k, m)
                .ok_or_else(|| at("compat", "p", format!("p has {} entries, expected K*M = {}", c.p.len(), k * m)))?,
            None => vec![vec![1.0; m]; k],
        };
        let params = SystemParams::new(
            raw.model.d,
            raw.rates.lambda,
            raw.model.xi,
            raw.fractions.w,
            raw.fractions.v,
            raw.rates.u,
            p,
        )
        .map_err(|e| {
            // validation messages start with the offending field name
            let (section, key) = match &e {
                Error::InvalidParams(msg) => match msg.split([' ', '[']).next().unwrap_or("") {
                    "lambda" => ("rates", "lambda"),
                    "service" | "u" => ("rates", "u"),
                    "xi" => ("model", "xi"),
                    "d" => ("model", "d"),
                    "w" => ("fractions", "w"),
                    "v" => ("fractions", "v"),
                    _ => ("compat", "p"),
                },
                _ => ("compat", "p"),
            };
            at(section, key, e.to_string())
        })?;

        let mut init = InitConditions::default();
        if let Some(raw_init) = raw.init {
            for (name, flat) in [("Q", raw_init.q), ("Q1", raw_init.q1), ("Q2", raw_init.q2)] {
                let Some(flat) = flat else { continue };
                if flat.len() % m != 0 || flat.is_empty() {
                    return Err(at("init", name, format!("{name} has {} entries, not a multiple of M = {m}", flat.len())));
                }
                let rows = reshape(&flat, m, flat.len() / m).expect("length checked");
                for (row_idx, row) in rows.iter().enumerate() {
                    let total: f64 = row.iter().sum();
                    if row.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                        return Err(at("init", name, format!("{name} row {} is not a pmf (sum {total})", row_idx + 1)));
                    }
                }
                init.named.push((name.to_string(), rows));
            }
        }

        let mut sim = SimSettings::default();
        if let Some(s) = raw.sim {
            sim.n = s.n.unwrap_or(sim.n);
            sim.horizon = s.horizon.unwrap_or(sim.horizon);
            sim.seeds = s.seeds.unwrap_or(sim.seeds);
            sim.master_seed = s.master_seed.unwrap_or(sim.master_seed);
            sim.snapshot_dt = s.snapshot_dt.unwrap_or(sim.snapshot_dt);
            sim.l_max = s.l_max.unwrap_or(sim.l_max);
        }
        for (key, bad) in [
            ("N", sim.n == 0),
            ("horizon", !(sim.horizon > 0.0)),
            ("seeds", sim.seeds == 0),
            ("snapshot_dt", !(sim.snapshot_dt > 0.0)),
            ("L_max", sim.l_max == 0),
        ] {
            if bad {
                return Err(at("sim", key, format!("{key} must be positive")));
            }
        }
        Ok(Config { params, init, sim })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const REFERENCE: &str = include_str!("../../../configs/reference.toml");

    #[test]
    fn reference_config_matches_preset() {
        let cfg = Config::parse(REFERENCE).unwrap();
        assert_eq!(cfg.params, presets::reference_params());
        assert_eq!(cfg.init.get("Q").unwrap(), &presets::rows(&presets::INIT_Q));
        assert_eq!(cfg.init.get("Q1").unwrap(), &presets::rows(&presets::INIT_Q1));
        assert_eq!(cfg.init.get("Q2").unwrap(), &presets::rows(&presets::INIT_Q2));
        assert_eq!(cfg.sim.n, 1000);
        assert_eq!(cfg.sim.seeds, 100);
        assert_eq!(cfg.sim.horizon, 2.5);
    }

    #[test]
    fn syntax_error_has_line() {
        let text = "[model]\nK = 1\nM = 1\nd = = 2\n";
        match Config::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_point_at_key() {
        let text = "[model]\nK = 1\nM = 2\nd = 2\n\n[rates]\nlambda = 0.5\nu = [1.0, 1.0]\n\n[fractions]\nw = [1.0]\nv = [0.5, 0.5]\n\n[compat]\np = [1.0, 1.0, 1.0]\n";
        match Config::parse(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 15, "{msg}");
                assert!(msg.contains("K*M"));
            }
            other => panic!("{other:?}"),
        }
        let bad_lambda = text.replace("lambda = 0.5", "lambda = -1.0").replace("p = [1.0, 1.0, 1.0]", "p = [1.0, 1.0]");
        match Config::parse(&bad_lambda) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        let unknown = text.replace("d = 2", "d = 2\nfoo = 1");
        assert!(matches!(Config::parse(&unknown), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn compat_defaults_to_complete() {
        let text = "[model]\nK = 1\nM = 1\nd = 2\n[rates]\nlambda = 0.7\nu = [1.0]\n[fractions]\nw = [1.0]\nv = [1.0]\n";
        let cfg = Config::parse(text).unwrap();
        assert_eq!(cfg.params, presets::homogeneous(0.7, 2));
        assert_eq!(cfg.sim, SimSettings::default());
        assert!(cfg.init.primary().is_none());
    }
}
