//! Edge-list text format.
//!
//! ```text
//! #qdiff-network<TAB>1
//! #bucket_weeks<TAB>2
//! #delta_t<TAB>1
//! #nodes<TAB>11 12 13 21 22
//! 11<TAB>12<TAB>3
//! 12<TAB>21<TAB>1,2
//! ```
//!
//! Edges are written in ascending `(from, to)` order; type codes are
//! `1`, `2`, `3`, `N` (noise) and `X` (external), comma separated.

use std::io::{BufRead, Write};

use super::{DifficultyNetwork, NetworkParams, TypeSet};
use crate::error::{Error, Result};
use crate::types::QuestionId;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

pub fn write_network<W: Write>(g: &DifficultyNetwork, mut w: W) -> Result<()> {
    writeln!(w, "#qdiff-network\t{NETWORK_FORMAT_VERSION}")?;
    writeln!(w, "#bucket_weeks\t{}", g.params.bucket_width_weeks)?;
    writeln!(w, "#delta_t\t{}", g.params.delta_t)?;
    write!(w, "#nodes\t")?;
    for (i, q) in g.nodes().iter().enumerate() {
        if i > 0 {
            w.write_all(b" ")?;
        }
        write!(w, "{q}")?;
    }
    writeln!(w)?;
    for e in g.edges() {
        writeln!(w, "{}\t{}\t{}", e.from, e.to, e.types)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_network<R: BufRead>(r: R) -> Result<DifficultyNetwork> {
    let mut params = NetworkParams::default();
    let mut g: Option<DifficultyNetwork> = None;
    let mut version = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let (key, value) = header.split_once('\t').unwrap_or((header, ""));
            let bad = |what: &str| Error::malformed(line_no, format!("bad {what} header"));
            match key {
                "qdiff-network" => {
                    let v: u32 = value.trim().parse().map_err(|_| bad("version"))?;
                    if v != NETWORK_FORMAT_VERSION {
                        return Err(Error::VersionMismatch {
                            found: v,
                            expected: NETWORK_FORMAT_VERSION,
                        });
                    }
                    version = Some(v);
                }
                "bucket_weeks" => params.bucket_width_weeks = value.trim().parse().map_err(|_| bad("bucket_weeks"))?,
                "delta_t" => params.delta_t = value.trim().parse().map_err(|_| bad("delta_t"))?,
                "nodes" => {
                    let nodes = value
                        .split_whitespace()
                        .map(|t| t.parse::<QuestionId>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| bad("nodes"))?;
                    g = Some(DifficultyNetwork::new(nodes, params));
                }
                _ => {}
            }
            continue;
        }
        if version.is_none() {
            return Err(Error::Corrupt("network file without version header".into()));
        }
        let g = g
            .as_mut()
            .ok_or_else(|| Error::malformed(line_no, "edge before #nodes header"))?;
        let mut parts = line.split('\t');
        let (Some(a), Some(b), Some(t), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(Error::malformed(line_no, "expected from<TAB>to<TAB>types"));
        };
        let from: QuestionId = a.parse().map_err(|_| Error::malformed(line_no, "bad from id"))?;
        let to: QuestionId = b.parse().map_err(|_| Error::malformed(line_no, "bad to id"))?;
        let types: TypeSet = t.parse().map_err(|e: Error| Error::malformed(line_no, e.to_string()))?;
        g.add_edge(from, to, types)
            .map_err(|e| Error::malformed(line_no, e.to_string()))?;
    }
    match (version, g) {
        (Some(_), Some(g)) => Ok(g),
        (None, _) => Err(Error::Corrupt("network file without version header".into())),
        (Some(_), None) => Err(Error::Corrupt("network file without #nodes header".into())),
    }
}
