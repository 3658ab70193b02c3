//! Generators and brute-force references shared by the integration tests.
#![allow(dead_code)]

pub mod merge_tree;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use ridgetrace_core::geom::Vec3;
use ridgetrace_core::morse::{GraphArc, GraphNode, MscGraph, NodeKind};
use ridgetrace_core::pathing::{prefix_weights, WeightedGraph};

/// Random graph: a spanning forest over `n` nodes plus `extra` arcs, each a
/// jittered straight polyline. `components` > 1 leaves that many trees.
pub fn random_graph(rng: &mut impl Rng, n: usize, extra: usize, components: usize, spacing: Vec3) -> MscGraph {
    let dims = [48, 48, 24];
    let hi = [47.0, 47.0, 23.0];
    let mut nodes: Vec<GraphNode> = Vec::with_capacity(n);
    while nodes.len() < n {
        let p = [rng.gen_range(1..47) as f64, rng.gen_range(1..47) as f64, rng.gen_range(1..23) as f64];
        if nodes.iter().all(|q| q.position != p) {
            nodes.push(GraphNode { kind: NodeKind::Saddle, position: p, value: rng.gen() });
        }
    }
    let mut arcs = Vec::new();
    let polyline = |rng: &mut _, a: usize, b: usize| -> GraphArc {
        let (pa, pb) = (nodes[a].position, nodes[b].position);
        let k = Rng::gen_range(rng, 0..6);
        let mut pts = vec![pa];
        for i in 1..=k {
            let t = i as f64 / (k + 1) as f64;
            let mut p = [0.0; 3];
            for ax in 0..3 {
                let j: f64 = Rng::gen_range(rng, -0.4..0.4);
                p[ax] = (pa[ax] + t * (pb[ax] - pa[ax]) + j).clamp(0.0, hi[ax]);
            }
            pts.push(p);
        }
        pts.push(pb);
        GraphArc { ends: [a as u32, b as u32], points: pts }
    };
    // node i belongs to block i * components / n; arcs stay inside blocks
    let block = |i: usize| i * components.max(1) / n;
    let start = |b: usize| (0..n).find(|&i| block(i) == b).unwrap_or(0);
    for i in 1..n {
        let s = start(block(i));
        if s == i {
            continue;
        }
        let j = rng.gen_range(s..i);
        arcs.push(polyline(rng, j, i));
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && block(a) == block(b) {
            arcs.push(polyline(rng, a, b));
        }
    }
    MscGraph::new(dims, spacing, nodes, arcs).expect("generated graph is valid")
}

/// Attaches random per-point intensities in [0, 1] as arc weights.
pub fn random_weights(rng: &mut impl Rng, g: MscGraph, eps: f64) -> WeightedGraph {
    let prefix = g
        .arcs()
        .iter()
        .map(|a| {
            let w: Vec<f64> = a.points.iter().map(|_| eps + 1.0 - rng.gen::<f64>()).collect();
            prefix_weights(&a.points, g.spacing(), &w)
        })
        .collect();
    WeightedGraph::from_parts(g, eps, prefix).unwrap()
}

/// Every geometry point as a vertex: arc ends map to their graph node,
/// interior points get their own vertex. Edges join consecutive points.
pub struct PointGraph {
    pub adj: Vec<Vec<(usize, f64)>>,
    pub pos: Vec<Vec3>,
    pub vertex: Vec<Vec<usize>>,
}

impl PointGraph {
    pub fn new(wg: &WeightedGraph) -> Self {
        let g = wg.graph();
        let mut pos: Vec<Vec3> = g.nodes().iter().map(|n| n.position).collect();
        let mut vertex = Vec::new();
        for a in g.arcs() {
            let last = a.points.len() - 1;
            let ids: Vec<usize> = (0..=last)
                .map(|i| match i {
                    0 => a.ends[0] as usize,
                    i if i == last => a.ends[1] as usize,
                    _ => {
                        pos.push(a.points[i]);
                        pos.len() - 1
                    }
                })
                .collect();
            vertex.push(ids);
        }
        let mut adj = vec![Vec::new(); pos.len()];
        for (ai, ids) in vertex.iter().enumerate() {
            let pre = wg.prefix(ai as u32);
            for i in 1..ids.len() {
                let w = pre[i] - pre[i - 1];
                adj[ids[i - 1]].push((ids[i], w));
                adj[ids[i]].push((ids[i - 1], w));
            }
        }
        Self { adj, pos, vertex }
    }

    pub fn vertex_of(&self, arc: u32, index: u32) -> usize {
        self.vertex[arc as usize][index as usize]
    }

    /// Plain Dijkstra from `s` to every vertex.
    pub fn dijkstra(&self, s: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; self.adj.len()];
        let mut heap = BinaryHeap::new();
        d[s] = 0.0;
        heap.push(Reverse((Ord(0.0), s)));
        while let Some(Reverse((Ord(du), u))) = heap.pop() {
            if du > d[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                if du + w < d[v] {
                    d[v] = du + w;
                    heap.push(Reverse((Ord(d[v]), v)));
                }
            }
        }
        d
    }
}

#[derive(Clone, Copy)]
struct Ord(f64);
impl PartialEq for Ord {
    fn eq(&self, o: &Self) -> bool {
        std::cmp::Ord::cmp(self, o).is_eq()
    }
}
impl Eq for Ord {}
impl PartialOrd for Ord {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(std::cmp::Ord::cmp(self, o))
    }
}
impl std::cmp::Ord for Ord {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

/// Trilinear interpolation written out one axis at a time.
pub fn trilinear_oracle(values: &[f64], dims: [usize; 3], p: Vec3) -> f64 {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut f = [0.0; 3];
    for a in 0..3 {
        let top = (dims[a] - 1) as f64;
        let c = p[a].max(0.0).min(top);
        let base = c.floor();
        lo[a] = base as usize;
        hi[a] = (lo[a] + 1).min(dims[a] - 1);
        f[a] = c - base;
    }
    let at = |x: usize, y: usize, z: usize| values[x + dims[0] * (y + dims[1] * z)];
    let lerp = |a: f64, b: f64, t: f64| a * (1.0 - t) + b * t;
    let mut plane = [0.0; 2];
    for (k, z) in [lo[2], hi[2]].into_iter().enumerate() {
        let r0 = lerp(at(lo[0], lo[1], z), at(hi[0], lo[1], z), f[0]);
        let r1 = lerp(at(lo[0], hi[1], z), at(hi[0], hi[1], z), f[0]);
        plane[k] = lerp(r0, r1, f[1]);
    }
    lerp(plane[0], plane[1], f[2])
}

/// Trapezoid integral of `ε + 1 − I` along `points`, sampling `I` with the
/// oracle above.
pub fn trapezoid_oracle(points: &[Vec3], spacing: Vec3, values: &[f64], dims: [usize; 3], eps: f64) -> f64 {
    let w = |p: Vec3| eps + 1.0 - trilinear_oracle(values, dims, p);
    points
        .windows(2)
        .map(|s| {
            let d: f64 = (0..3).map(|a| ((s[1][a] - s[0][a]) * spacing[a]).powi(2)).sum::<f64>().sqrt();
            d * (w(s[0]) + w(s[1])) / 2.0
        })
        .sum()
}

/// Reference trace that follows a tree-shaped graph from node `root`: every
/// arc becomes a chain of physical points.
pub fn tree_reference(g: &MscGraph, root: u32) -> ridgetrace_core::session::Reconstruction {
    use ridgetrace_core::session::{Reconstruction, TraceKind};
    let mut rec = Reconstruction::new();
    let first = rec.append_chain(None, &[g.to_physical(g.node(root).position)], TraceKind::Manual).unwrap()[0];
    let mut at = vec![None; g.nodes().len()];
    at[root as usize] = Some(first);
    let mut used = vec![false; g.arcs().len()];
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        for &a in g.incident_arcs(u) {
            if std::mem::replace(&mut used[a as usize], true) {
                continue;
            }
            let arc = g.arc(a);
            let mut pts: Vec<Vec3> = arc.points.iter().map(|&p| g.to_physical(p)).collect();
            let other = if arc.ends[0] == u { arc.ends[1] } else {
                pts.reverse();
                arc.ends[0]
            };
            let ids = rec.append_chain(at[u as usize], &pts[1..], TraceKind::Manual).unwrap();
            at[other as usize] = ids.last().copied();
            stack.push(other);
        }
    }
    rec
}

/// Voxels strictly brighter than every existing 26-neighbour.
pub fn count_local_maxima(v: &ridgetrace_core::volume::ScalarVolume) -> usize {
    let [nx, ny, nz] = v.dims();
    let mut count = 0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let c = v.get(x, y, z);
                let mut peak = true;
                'scan: for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                            if (dx, dy, dz) == (0, 0, 0)
                                || qx < 0 || qy < 0 || qz < 0
                                || qx >= nx as i64 || qy >= ny as i64 || qz >= nz as i64
                            {
                                continue;
                            }
                            if v.get(qx as usize, qy as usize, qz as usize) >= c {
                                peak = false;
                                break 'scan;
                            }
                        }
                    }
                }
                count += peak as usize;
            }
        }
    }
    count
}
