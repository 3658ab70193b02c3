//! SWC import and export.
//!
//! Rows are `id type x y z radius parent`, whitespace separated, with `#`
//! comments. Export renumbers nodes 1..n in depth-first order so every parent
//! precedes its children, writes type 0 (undefined) and radius 1, and prints
//! coordinates with the shortest representation that parses back exactly.

use std::collections::BTreeMap;
use std::fmt::Write;

use ridgetrace_core::session::{EditError, NodeId, Reconstruction, TraceKind, TraceNode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SwcError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: parent {parent} is not defined anywhere in the file")]
    UnknownParent { line: usize, parent: i64 },
    #[error("line {line}: node id {id} is defined twice")]
    DuplicateId { line: usize, id: u64 },
    #[error("parent links form a cycle through node {0}")]
    Cycle(u64),
}

/// One parsed data row.
#[derive(Debug, Clone, PartialEq)]
pub struct SwcRow {
    pub id: u64,
    pub kind: i64,
    pub position: [f64; 3],
    pub radius: f64,
    pub parent: Option<u64>,
}

pub fn export_swc(rec: &Reconstruction) -> String {
    let order = rec.dfs_order();
    let number: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, &id)| (id, i + 1)).collect();
    let mut out = String::from("# ridgetrace reconstruction\n# id type x y z radius parent\n");
    for &id in &order {
        let n = rec.node(id).expect("dfs order lists existing nodes");
        let parent = n.parent.map_or(-1, |p| number[&p] as i64);
        let [x, y, z] = n.position;
        writeln!(out, "{} 0 {x} {y} {z} 1 {parent}", number[&id]).expect("writing to a String");
    }
    out
}

/// Parses rows without checking parent links.
pub fn parse_rows(text: &str) -> Result<Vec<(usize, SwcRow)>, SwcError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let f: Vec<&str> = content.split_whitespace().collect();
        let bad = |reason: String| SwcError::Malformed { line, reason };
        if f.len() < 7 {
            return Err(bad(format!("expected 7 fields, found {}", f.len())));
        }
        let int = |s: &str, what: &str| -> Result<i64, SwcError> {
            s.parse::<i64>()
                .or_else(|e| match s.parse::<f64>() {
                    Ok(x) if x.fract() == 0.0 && x.abs() < 9e15 => Ok(x as i64),
                    _ => Err(e),
                })
                .map_err(|_| bad(format!("{what} {s:?} is not an integer")))
        };
        let num = |s: &str, what: &str| -> Result<f64, SwcError> {
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(format!("{what} {s:?} is not a finite number"))),
            }
        };
        let id = int(f[0], "id")?;
        if id < 0 {
            return Err(bad(format!("negative id {id}")));
        }
        let parent = int(f[6], "parent")?;
        rows.push((
            line,
            SwcRow {
                id: id as u64,
                kind: int(f[1], "type")?,
                position: [num(f[2], "x")?, num(f[3], "y")?, num(f[4], "z")?],
                radius: num(f[5], "radius")?,
                parent: (parent >= 0).then_some(parent as u64),
            },
        ));
    }
    Ok(rows)
}

/// Reads a reconstruction. Rows may come in any order; node ids are kept.
pub fn import_swc(text: &str) -> Result<Reconstruction, SwcError> {
    let rows = parse_rows(text)?;
    let mut seen = BTreeMap::new();
    for (line, r) in &rows {
        if seen.insert(r.id, *line).is_some() {
            return Err(SwcError::DuplicateId { line: *line, id: r.id });
        }
    }
    for (line, r) in &rows {
        if let Some(p) = r.parent {
            if !seen.contains_key(&p) {
                return Err(SwcError::UnknownParent { line: *line, parent: p as i64 });
            }
        }
    }
    let nodes = rows
        .into_iter()
        .map(|(_, r)| TraceNode { id: r.id, position: r.position, parent: r.parent, kind: TraceKind::Manual })
        .collect();
    Reconstruction::from_nodes(nodes).map_err(|e| match e {
        EditError::Cycle { child, .. } => SwcError::Cycle(child),
        other => SwcError::Malformed { line: 0, reason: other.to_string() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parents_after_children_are_accepted() {
        let r = import_swc("2 3 1 0 0 1 1\n1 1 0 0 0 1 -1\n").unwrap();
        assert_eq!(r.node(2).unwrap().parent, Some(1));
        assert_eq!(export_swc(&r).lines().nth(2).unwrap(), "1 0 0 0 0 1 -1");
    }

    #[test]
    fn errors() {
        assert!(matches!(import_swc("1 1 0 0 0 1 7\n"), Err(SwcError::UnknownParent { line: 1, parent: 7 })));
        assert!(matches!(import_swc("1 1 0 0\n"), Err(SwcError::Malformed { line: 1, .. })));
        assert!(matches!(import_swc("1 1 0 0 x 1 -1\n"), Err(SwcError::Malformed { .. })));
        assert!(matches!(import_swc("1 1 0 0 0 1 -1\n1 1 0 0 0 1 -1\n"), Err(SwcError::DuplicateId { line: 2, id: 1 })));
        assert!(matches!(import_swc("1 1 0 0 0 1 2\n2 1 0 0 0 1 1\n"), Err(SwcError::Cycle(_))));
    }

    #[test]
    fn export_is_depth_first() {
        let mut r = Reconstruction::new();
        let a = r.append_chain(None, &[[0.0; 3], [1.0, 0.0, 0.0]], TraceKind::Guided).unwrap();
        r.append_chain(None, &[[5.0, 5.0, 5.0]], TraceKind::Manual).unwrap();
        r.append_chain(Some(a[0]), &[[0.0, 1.5, 0.25]], TraceKind::Manual).unwrap();
        let s = export_swc(&r);
        let body: Vec<&str> = s.lines().skip(2).collect();
        assert_eq!(body, ["1 0 0 0 0 1 -1", "2 0 1 0 0 1 1", "3 0 0 1.5 0.25 1 1", "4 0 5 5 5 1 -1"]);
    }
}
