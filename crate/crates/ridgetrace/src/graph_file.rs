//! Binary graph files.
//!
//! Layout, all little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `RTGRAPH\n` | 8 bytes |
//! | version (currently 1) | u32 |
//! | flags (bit 0: weights present) | u32 |
//! | dims | 3 × u64 |
//! | spacing | 3 × f64 |
//! | epsilon (0 when unweighted) | f64 |
//! | node count, then per node: kind u8, position 3 × f64, value f64 | u64 |
//! | arc count, then per arc: ends 2 × u32, point count u64, points, prefix weights | u64 |
//! | FNV-1a 64 checksum of everything above | u64 |
//!
//! Node kinds: 0 saddle, 1 maximum, 2 merge, 3 boundary. Prefix weights are
//! one f64 per point and only present when flag bit 0 is set.

use std::path::Path;

use ridgetrace_core::morse::{GraphArc, GraphError, GraphNode, MscGraph, NodeKind};
use ridgetrace_core::pathing::{compute_arc_weights, PathError, WeightParams, WeightedGraph};
use ridgetrace_core::volume::NormalizedVolume;

pub const MAGIC: &[u8; 8] = b"RTGRAPH\n";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum GraphFileError {
    #[error("not a ridgetrace graph file")]
    BadMagic,
    #[error("graph file version {found} is not supported (expected {VERSION})")]
    Version { found: u32 },
    #[error("corrupt graph file: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Weights(#[from] PathError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Contents of a graph file: the graph and, optionally, its arc weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredGraph {
    pub graph: MscGraph,
    pub weights: Option<(f64, Vec<Vec<f64>>)>,
}

impl StoredGraph {
    pub fn unweighted(graph: MscGraph) -> Self {
        Self { graph, weights: None }
    }

    pub fn from_weighted(wg: &WeightedGraph) -> Self {
        Self { graph: wg.graph().clone(), weights: Some((wg.epsilon(), wg.prefixes().to_vec())) }
    }

    /// Uses the stored weights when present and `wp` agrees on epsilon,
    /// otherwise weighs the arcs against `v`.
    pub fn into_weighted(self, v: &NormalizedVolume, wp: &WeightParams) -> Result<WeightedGraph, PathError> {
        if v.dims() != self.graph.dims() {
            return Err(PathError::DimensionMismatch { graph: self.graph.dims(), volume: v.dims() });
        }
        match self.weights {
            Some((eps, prefix)) if eps == wp.epsilon => WeightedGraph::from_parts(self.graph, eps, prefix),
            _ => compute_arc_weights(self.graph, v, wp),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn kind_code(k: NodeKind) -> u8 {
    match k {
        NodeKind::Saddle => 0,
        NodeKind::Maximum => 1,
        NodeKind::Merge => 2,
        NodeKind::Boundary => 3,
    }
}

pub fn encode_graph(s: &StoredGraph) -> Vec<u8> {
    let g = &s.graph;
    let mut b = Vec::with_capacity(64 + g.num_points() * 32 + g.nodes().len() * 33);
    b.extend_from_slice(MAGIC);
    b.extend(VERSION.to_le_bytes());
    b.extend((s.weights.is_some() as u32).to_le_bytes());
    g.dims().iter().for_each(|&d| b.extend((d as u64).to_le_bytes()));
    g.spacing().iter().for_each(|&x| b.extend(x.to_le_bytes()));
    b.extend(s.weights.as_ref().map_or(0.0, |w| w.0).to_le_bytes());
    b.extend((g.nodes().len() as u64).to_le_bytes());
    for n in g.nodes() {
        b.push(kind_code(n.kind));
        n.position.iter().for_each(|&x| b.extend(x.to_le_bytes()));
        b.extend(n.value.to_le_bytes());
    }
    b.extend((g.arcs().len() as u64).to_le_bytes());
    for (i, a) in g.arcs().iter().enumerate() {
        b.extend(a.ends[0].to_le_bytes());
        b.extend(a.ends[1].to_le_bytes());
        b.extend((a.points.len() as u64).to_le_bytes());
        a.points.iter().flatten().for_each(|&x| b.extend(x.to_le_bytes()));
        if let Some((_, prefix)) = &s.weights {
            prefix[i].iter().for_each(|&x| b.extend(x.to_le_bytes()));
        }
    }
    let sum = fnv1a(&b);
    b.extend(sum.to_le_bytes());
    b
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GraphFileError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(GraphFileError::Corrupt("truncated"))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, GraphFileError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, GraphFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, GraphFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, GraphFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn vec3(&mut self) -> Result<[f64; 3], GraphFileError> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }
    /// A count whose items need at least `min_bytes` each.
    fn count(&mut self, min_bytes: usize) -> Result<usize, GraphFileError> {
        let n = self.u64()?;
        if n.saturating_mul(min_bytes as u64) > (self.buf.len() - self.at) as u64 {
            return Err(GraphFileError::Corrupt("count exceeds file size"));
        }
        Ok(n as usize)
    }
}

pub fn decode_graph(bytes: &[u8]) -> Result<StoredGraph, GraphFileError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(GraphFileError::BadMagic);
    }
    let mut r = Reader { buf: bytes, at: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(GraphFileError::Version { found: version });
    }
    if bytes.len() < 8 + 8 {
        return Err(GraphFileError::Corrupt("truncated"));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if fnv1a(body) != u64::from_le_bytes(sum.try_into().expect("8 bytes")) {
        return Err(GraphFileError::Corrupt("checksum mismatch"));
    }
    let mut r = Reader { buf: body, at: r.at };
    let flags = r.u32()?;
    if flags > 1 {
        return Err(GraphFileError::Corrupt("unknown flags"));
    }
    let weighted = flags & 1 == 1;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = usize::try_from(r.u64()?).map_err(|_| GraphFileError::Corrupt("dimension overflow"))?;
    }
    let spacing = r.vec3()?;
    let eps = r.f64()?;
    let n_nodes = r.count(33)?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let kind = match r.u8()? {
            0 => NodeKind::Saddle,
            1 => NodeKind::Maximum,
            2 => NodeKind::Merge,
            3 => NodeKind::Boundary,
            _ => return Err(GraphFileError::Corrupt("unknown node kind")),
        };
        nodes.push(GraphNode { kind, position: r.vec3()?, value: r.f64()? });
    }
    let n_arcs = r.count(16)?;
    let mut arcs = Vec::with_capacity(n_arcs);
    let mut prefix = Vec::new();
    for _ in 0..n_arcs {
        let ends = [r.u32()?, r.u32()?];
        let n = r.count(24)?;
        let points = (0..n).map(|_| r.vec3()).collect::<Result<Vec<_>, _>>()?;
        if weighted {
            prefix.push((0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?);
        }
        arcs.push(GraphArc { ends, points });
    }
    if r.at != body.len() {
        return Err(GraphFileError::Corrupt("trailing bytes"));
    }
    let graph = MscGraph::new(dims, spacing, nodes, arcs)?;
    let weights = if weighted {
        // validate now so a bad table is reported as a load error
        let wg = WeightedGraph::from_parts(graph.clone(), eps, prefix)?;
        Some((eps, wg.prefixes().to_vec()))
    } else {
        None
    };
    Ok(StoredGraph { graph, weights })
}

pub fn save_graph(s: &StoredGraph, path: &Path) -> Result<(), GraphFileError> {
    Ok(std::fs::write(path, encode_graph(s))?)
}

pub fn load_graph(path: &Path) -> Result<StoredGraph, GraphFileError> {
    decode_graph(&std::fs::read(path)?)
}
