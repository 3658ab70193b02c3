//! The ridge graph handed to querying: nodes, arcs and arc geometry.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::complex::{Endpoint, MorseComplex};
use super::cubical::{CellId, CubicalGrid};
use crate::geom::{polyline_length, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NodeKind {
    /// A surviving 2-saddle.
    Saddle,
    /// A surviving maximum.
    Maximum,
    /// A point where arcs converge after simplification.
    Merge,
    /// Where an arc leaves the domain.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraphNode {
    pub kind: NodeKind,
    /// Voxel coordinates.
    pub position: Vec3,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraphArc {
    /// Start and end node; equal for loops.
    pub ends: [u32; 2],
    /// Voxel-space polyline from `ends[0]` to `ends[1]`, endpoints included.
    pub points: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("spacing must be finite and positive")]
    BadSpacing,
    #[error("arc {0} references a missing node")]
    MissingNode(usize),
    #[error("arc {0} has fewer than two points")]
    ShortArc(usize),
    #[error("arc {0} does not start and end at its nodes")]
    DetachedArc(usize),
    #[error("arc {0} repeats a point consecutively")]
    RepeatedPoint(usize),
    #[error("arc {0} has a non-finite or out-of-volume point")]
    OutOfBounds(usize),
}

/// Ridge graph. Every arc polyline starts at its first node and ends at its
/// second; interior points belong to exactly one arc.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MscGraph {
    dims: [usize; 3],
    spacing: Vec3,
    nodes: Vec<GraphNode>,
    arcs: Vec<GraphArc>,
    #[cfg_attr(feature = "serde", serde(skip))]
    lengths: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    incident: Vec<Vec<u32>>,
}

impl MscGraph {
    /// Validates and assembles a graph.
    pub fn new(
        dims: [usize; 3],
        spacing: Vec3,
        nodes: Vec<GraphNode>,
        arcs: Vec<GraphArc>,
    ) -> Result<Self, GraphError> {
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(GraphError::BadSpacing);
        }
        let hi = [dims[0] as f64 - 1.0, dims[1] as f64 - 1.0, dims[2] as f64 - 1.0];
        let inside = |p: &Vec3| (0..3).all(|a| p[a].is_finite() && p[a] >= 0.0 && p[a] <= hi[a]);
        for (i, a) in arcs.iter().enumerate() {
            if a.ends.iter().any(|&n| n as usize >= nodes.len()) {
                return Err(GraphError::MissingNode(i));
            }
            if a.points.len() < 2 {
                return Err(GraphError::ShortArc(i));
            }
            if a.points.iter().any(|p| !inside(p)) {
                return Err(GraphError::OutOfBounds(i));
            }
            if a.points[0] != nodes[a.ends[0] as usize].position
                || a.points[a.points.len() - 1] != nodes[a.ends[1] as usize].position
            {
                return Err(GraphError::DetachedArc(i));
            }
            if a.points.windows(2).any(|w| w[0] == w[1]) {
                return Err(GraphError::RepeatedPoint(i));
            }
        }
        if nodes.iter().any(|n| !inside(&n.position)) {
            return Err(GraphError::OutOfBounds(usize::MAX));
        }
        Ok(Self::assemble(dims, spacing, nodes, arcs))
    }

    fn assemble(dims: [usize; 3], spacing: Vec3, nodes: Vec<GraphNode>, arcs: Vec<GraphArc>) -> Self {
        let lengths = arcs.iter().map(|a| polyline_length(&a.points, spacing)).collect();
        let mut incident = vec![Vec::new(); nodes.len()];
        for (i, a) in arcs.iter().enumerate() {
            incident[a.ends[0] as usize].push(i as u32);
            if a.ends[1] != a.ends[0] {
                incident[a.ends[1] as usize].push(i as u32);
            }
        }
        Self { dims, spacing, nodes, arcs, lengths, incident }
    }

    /// Rebuilds derived tables after deserialization.
    pub fn revalidate(self) -> Result<Self, GraphError> {
        Self::new(self.dims, self.spacing, self.nodes, self.arcs)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[GraphArc] {
        &self.arcs
    }

    pub fn node(&self, i: u32) -> &GraphNode {
        &self.nodes[i as usize]
    }

    pub fn arc(&self, i: u32) -> &GraphArc {
        &self.arcs[i as usize]
    }

    /// Physical length of an arc.
    pub fn arc_length(&self, i: u32) -> f64 {
        self.lengths[i as usize]
    }

    /// Arcs touching a node (loops listed once).
    pub fn incident_arcs(&self, node: u32) -> &[u32] {
        &self.incident[node as usize]
    }

    pub fn num_points(&self) -> usize {
        self.arcs.iter().map(|a| a.points.len()).sum()
    }

    /// Voxel to physical coordinates.
    pub fn to_physical(&self, p: Vec3) -> Vec3 {
        crate::geom::mul(p, self.spacing)
    }

    /// Copy with every arc smoothed by `iterations` rounds of three-point
    /// averaging. Arc endpoints, and therefore nodes, do not move.
    pub fn smoothed(&self, iterations: usize) -> Self {
        let arcs = self
            .arcs
            .iter()
            .map(|a| GraphArc { ends: a.ends, points: smooth_polyline(&a.points, iterations) })
            .collect();
        Self::assemble(self.dims, self.spacing, self.nodes.clone(), arcs)
    }

    /// Number of connected components (isolated nodes count).
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut n = self.nodes.len();
        for a in &self.arcs {
            let (x, y) = (find(&mut parent, a.ends[0] as usize), find(&mut parent, a.ends[1] as usize));
            if x != y {
                parent[x] = y;
                n -= 1;
            }
        }
        n
    }
}

/// Jacobi three-point averaging with fixed endpoints. Consecutive points that
/// coincide afterwards are merged.
pub fn smooth_polyline(points: &[Vec3], iterations: usize) -> Vec<Vec3> {
    let mut cur = points.to_vec();
    let mut next = cur.clone();
    for _ in 0..iterations {
        if cur.len() < 3 {
            break;
        }
        for i in 1..cur.len() - 1 {
            for a in 0..3 {
                next[i][a] = (cur[i - 1][a] + cur[i][a] + cur[i + 1][a]) / 3.0;
            }
        }
        core::mem::swap(&mut cur, &mut next);
    }
    cur.dedup();
    cur
}

/// An arc before merge-node insertion: a chain of cells with the node kinds
/// of its two ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawArc {
    pub cells: Vec<CellId>,
    pub kinds: [NodeKind; 2],
}

/// Surviving saddle-max arcs of a complex, one per saddle side that leaves
/// the saddle cell.
pub fn raw_arcs(mc: &MorseComplex) -> Vec<RawArc> {
    let mut out = Vec::new();
    for (s, _) in mc.alive(2) {
        for end in mc.saddle_arcs(s).expect("live saddle has arcs") {
            if end.cells.len() < 2 {
                continue;
            }
            let kind = match end.target {
                Endpoint::Max(_) => NodeKind::Maximum,
                Endpoint::Boundary => NodeKind::Boundary,
            };
            out.push(RawArc { cells: end.cells.clone(), kinds: [NodeKind::Saddle, kind] });
        }
    }
    out
}

/// Turns the surviving arcs of a simplified complex into a graph.
pub fn build_graph(mc: &MorseComplex, spacing: Vec3) -> MscGraph {
    let mut arcs = raw_arcs(mc);
    // isolated maxima still become nodes
    for (_, n) in mc.alive(3) {
        arcs.push(RawArc { cells: vec![n.cell], kinds: [NodeKind::Maximum; 2] });
    }
    build_msc_graph(mc.grid(), spacing, &arcs, |c| mc.cell_value(c))
}

/// Overlays raw arcs as a point graph on cell centers and cuts it into arcs.
///
/// Nodes are the arc ends and every point where arcs meet or branch. Shared
/// stretches of geometry are stored once, and chains through points of degree
/// two are fused, so every interior geometry point belongs to one arc.
pub fn build_msc_graph(
    grid: &CubicalGrid,
    spacing: Vec3,
    raw: &[RawArc],
    value: impl Fn(CellId) -> f64,
) -> MscGraph {
    let grid = *grid;
    let mut kinds: BTreeMap<CellId, NodeKind> = BTreeMap::new();
    let mut edges: Vec<(CellId, CellId)> = Vec::new();
    for a in raw {
        let (Some(&first), Some(&last)) = (a.cells.first(), a.cells.last()) else { continue };
        for (c, k) in [(first, a.kinds[0]), (last, a.kinds[1])] {
            let e = kinds.entry(c).or_insert(k);
            *e = (*e).min(k);
        }
        for w in a.cells.windows(2) {
            if w[0] != w[1] {
                edges.push((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    // point table and CSR adjacency with undirected edge ids
    let mut points: Vec<CellId> = edges.iter().flat_map(|&(a, b)| [a, b]).chain(kinds.keys().copied()).collect();
    points.sort_unstable();
    points.dedup();
    let idx = |c: CellId| points.binary_search(&c).expect("point is indexed");
    let mut start = vec![0usize; points.len() + 1];
    for &(a, b) in &edges {
        start[idx(a) + 1] += 1;
        start[idx(b) + 1] += 1;
    }
    for i in 0..points.len() {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut adj = vec![(0usize, 0usize); start[points.len()]];
    for (e, &(a, b)) in edges.iter().enumerate() {
        let (ia, ib) = (idx(a), idx(b));
        adj[fill[ia]] = (ib, e);
        fill[ia] += 1;
        adj[fill[ib]] = (ia, e);
        fill[ib] += 1;
    }
    let degree = |i: usize| start[i + 1] - start[i];

    let mut node_of = vec![u32::MAX; points.len()];
    let mut nodes = Vec::new();
    for (i, &c) in points.iter().enumerate() {
        let kind = match kinds.get(&c) {
            Some(&k) => Some(k),
            None if degree(i) != 2 => Some(NodeKind::Merge),
            None => None,
        };
        if let Some(kind) = kind {
            node_of[i] = nodes.len() as u32;
            nodes.push(GraphNode { kind, position: grid.center(c), value: value(c) });
        }
    }

    let mut used = vec![false; edges.len()];
    let mut arcs = Vec::new();
    let walk = |from: usize, first: (usize, usize), used: &mut [bool], node_of: &[u32]| {
        let mut pts = vec![grid.center(points[from])];
        let (mut prev_edge, mut cur) = (first.1, first.0);
        used[prev_edge] = true;
        loop {
            pts.push(grid.center(points[cur]));
            if node_of[cur] != u32::MAX {
                break;
            }
            let next = adj[start[cur]..start[cur + 1]]
                .iter()
                .copied()
                .find(|&(_, e)| e != prev_edge)
                .expect("chain point has degree two");
            if used[next.1] {
                // closed the loop back onto a previously walked edge
                break;
            }
            used[next.1] = true;
            prev_edge = next.1;
            cur = next.0;
        }
        (cur, pts)
    };

    for i in 0..points.len() {
        if node_of[i] == u32::MAX {
            continue;
        }
        for k in start[i]..start[i + 1] {
            if used[adj[k].1] {
                continue;
            }
            let (end, pts) = walk(i, adj[k], &mut used, &node_of);
            arcs.push(GraphArc { ends: [node_of[i], node_of[end]], points: pts });
        }
    }
    // Cycles without any node: promote their smallest point.
    for i in 0..points.len() {
        if node_of[i] != u32::MAX || adj[start[i]..start[i + 1]].iter().all(|&(_, e)| used[e]) {
            continue;
        }
        node_of[i] = nodes.len() as u32;
        nodes.push(GraphNode {
            kind: NodeKind::Merge,
            position: grid.center(points[i]),
            value: value(points[i]),
        });
        let (end, pts) = walk(i, adj[start[i]], &mut used, &node_of);
        arcs.push(GraphArc { ends: [node_of[i], node_of[end]], points: pts });
    }
    MscGraph::assemble(grid.vertex_dims(), spacing, nodes, arcs)
}
