//! Edge-list text format.
//!
//! ```text
//! # hetlb compatibility graph
//! N 4
//! W 2
//! server_types 1 1 2 2
//! dispatcher_types 1 2
//! 0 0
//! 0 3
//! ...
//! ```
//!
//! Types are 1-based, ids 0-based; edges are sorted by `(i, j)`.

use std::fmt::Write as _;
use std::io::BufRead;

use super::CompatibilityGraph;
use crate::error::{Error, Result};

impl CompatibilityGraph {
    pub fn to_edge_list(&self) -> String {
        let mut out = String::from("# hetlb compatibility graph\n");
        let _ = writeln!(out, "N {}", self.num_servers());
        let _ = writeln!(out, "W {}", self.num_dispatchers());
        let join = |xs: &[usize]| xs.iter().map(|t| (t + 1).to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "server_types {}", join(&self.server_type));
        let _ = writeln!(out, "dispatcher_types {}", join(&self.dispatcher_type));
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses [`to_edge_list`](Self::to_edge_list) output. `num_types = (K, M)`.
    pub fn from_edge_list(reader: impl BufRead, num_types: (usize, usize)) -> Result<Self> {
        let mut n = None;
        let mut w = None;
        let mut server_type = None;
        let mut dispatcher_type = None;
        let mut edges = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or_default();
            let types = |parts: std::str::SplitWhitespace<'_>| -> Result<Vec<usize>> {
                parts
                    .map(|t| match t.parse::<usize>() {
                        Ok(x) if x >= 1 => Ok(x - 1),
                        _ => Err(err(format!("bad type label `{t}`"))),
                    })
                    .collect()
            };
            match head {
                "N" => n = Some(parse_one(parts, &err)?),
                "W" => w = Some(parse_one(parts, &err)?),
                "server_types" => server_type = Some(types(parts)?),
                "dispatcher_types" => dispatcher_type = Some(types(parts)?),
                _ => {
                    let i: usize = head.parse().map_err(|_| err(format!("bad line `{line}`")))?;
                    let j: usize = parse_one(parts, &err)?;
                    edges.push((i, j));
                }
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, msg: format!("missing `{what}` header") };
        let server_type = server_type.ok_or_else(|| missing("server_types"))?;
        let dispatcher_type = dispatcher_type.ok_or_else(|| missing("dispatcher_types"))?;
        if n.ok_or_else(|| missing("N"))? != server_type.len() || w.ok_or_else(|| missing("W"))? != dispatcher_type.len() {
            return Err(Error::Parse { line: 0, msg: "N/W disagree with type maps".into() });
        }
        Self::from_edges(server_type, dispatcher_type, num_types, edges)
    }
}

fn parse_one(mut parts: std::str::SplitWhitespace<'_>, err: &dyn Fn(String) -> Error) -> Result<usize> {
    let tok = parts.next().ok_or_else(|| err("missing value".into()))?;
    if parts.next().is_some() {
        return Err(err("trailing tokens".into()));
    }
    tok.parse().map_err(|_| err(format!("bad integer `{tok}`")))
}
