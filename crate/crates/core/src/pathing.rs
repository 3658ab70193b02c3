//! Intensity-weighted arcs and A* over the graph with query points split in.
//!
//! Every arc carries the trapezoid integral of `w(p) = ε + 1 − I(p)` along
//! its polyline, stored as prefix sums so any sub-polyline weight is one
//! subtraction. Each arc's sums are rounded to a multiple of the ulp of its
//! total, which makes every difference and re-sum of them exact: the two
//! halves of a split add back to the whole weight bit for bit.
//!
//! Query points are spliced in symbolically: the arc they sit on is
//! replaced, for the duration of the query only, by its pieces between
//! consecutive split points.
//!
//! The search heuristic is `ε · |p − end|` in physical units. Since `I ≤ 1`,
//! every unit of length costs at least `ε`, so the heuristic never
//! overestimates and A* returns exact shortest paths. Plain Euclidean
//! distance would overestimate along bright ridges.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::geom::{mul, norm, physical_dist, sub, Vec3};
use crate::morse::MscGraph;
use crate::spatial::GraphLocation;
use crate::volume::NormalizedVolume;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightParams {
    pub epsilon: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self { epsilon: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("no path connects the two locations")]
    NoPath,
    #[error("location does not refer to the current graph")]
    StaleLocation,
    #[error("epsilon must be finite and positive")]
    BadEpsilon,
    #[error("volume is {volume:?} but the graph was built on {graph:?}")]
    DimensionMismatch { graph: [usize; 3], volume: [usize; 3] },
    #[error("weight table does not match arc {0}")]
    BadWeights(usize),
}

/// A graph with per-arc cumulative weights.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    graph: MscGraph,
    epsilon: f64,
    prefix: Vec<Vec<f64>>,
}

/// Cumulative trapezoid weights along a polyline.
pub fn prefix_weights(points: &[Vec3], spacing: Vec3, w: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..points.len() {
        acc += physical_dist(points[i - 1], points[i], spacing) * (w[i - 1] + w[i]) * 0.5;
        out.push(acc);
    }
    snap_to_grid(&mut out);
    out
}

/// Rounds every entry to a multiple of `ulp(last)`. All entries then lie on
/// one grid with fewer than 2^53 steps, so differences and sums of them are
/// exact.
fn snap_to_grid(prefix: &mut [f64]) {
    let total = match prefix.last() {
        Some(&t) if t > 0.0 && t.is_finite() => t,
        _ => return,
    };
    let q = f64::from_bits(total.to_bits() + 1) - total;
    for p in prefix.iter_mut() {
        *p = libm::round(*p / q) * q;
    }
}

/// Weights every arc of `g` against `v`.
pub fn compute_arc_weights(
    g: MscGraph,
    v: &NormalizedVolume,
    wp: &WeightParams,
) -> Result<WeightedGraph, PathError> {
    if !(wp.epsilon.is_finite() && wp.epsilon > 0.0) {
        return Err(PathError::BadEpsilon);
    }
    if v.dims() != g.dims() {
        return Err(PathError::DimensionMismatch { graph: g.dims(), volume: v.dims() });
    }
    let prefix = g
        .arcs()
        .iter()
        .map(|a| {
            let w: Vec<f64> = a.points.iter().map(|&p| wp.epsilon + 1.0 - v.sample_trilinear(p)).collect();
            prefix_weights(&a.points, g.spacing(), &w)
        })
        .collect();
    Ok(WeightedGraph { graph: g, epsilon: wp.epsilon, prefix })
}

impl WeightedGraph {
    /// Reassembles a weighted graph from stored prefix sums.
    pub fn from_parts(graph: MscGraph, epsilon: f64, mut prefix: Vec<Vec<f64>>) -> Result<Self, PathError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(PathError::BadEpsilon);
        }
        if prefix.len() != graph.arcs().len() {
            return Err(PathError::BadWeights(prefix.len().min(graph.arcs().len())));
        }
        for (i, (p, a)) in prefix.iter().zip(graph.arcs()).enumerate() {
            let ok = p.len() == a.points.len()
                && p.first() == Some(&0.0)
                && p.iter().all(|x| x.is_finite())
                && p.windows(2).all(|w| w[1] >= w[0]);
            if !ok {
                return Err(PathError::BadWeights(i));
            }
        }
        prefix.iter_mut().for_each(|p| snap_to_grid(p));
        Ok(Self { graph, epsilon, prefix })
    }

    pub fn graph(&self) -> &MscGraph {
        &self.graph
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn prefix(&self, arc: u32) -> &[f64] {
        &self.prefix[arc as usize]
    }

    pub fn prefixes(&self) -> &[Vec<f64>] {
        &self.prefix
    }

    pub fn arc_weight(&self, arc: u32) -> f64 {
        *self.prefix[arc as usize].last().expect("arcs have points")
    }

    /// Weight of the sub-polyline between two point indices of an arc.
    pub fn partial_weight(&self, arc: u32, i: u32, j: u32) -> f64 {
        let p = &self.prefix[arc as usize];
        (p[j as usize] - p[i as usize]).abs()
    }

    pub fn into_graph(self) -> MscGraph {
        self.graph
    }
}

/// One stretch of an arc walked by a path, from point `from` to point `to`
/// (`from > to` when walked backwards).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Traversal {
    pub arc: u32,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathResult {
    /// Voxel-space polyline from the start location to the end location.
    pub points: Vec<Vec3>,
    pub total_weight: f64,
    pub traversals: Vec<Traversal>,
}

/// The two query points as virtual nodes placed on their arcs.
struct Overlay {
    n: u32,
    /// `(arc, sorted [(index, virtual node)])` for the at most two split arcs.
    splits: Vec<(u32, Vec<(u32, u32)>)>,
    sites: [(u32, u32); 2],
}

impl Overlay {
    fn new(g: &MscGraph, start: &GraphLocation, end: &GraphLocation) -> Self {
        let n = g.nodes().len() as u32;
        let mut splits: Vec<(u32, Vec<(u32, u32)>)> = Vec::new();
        for (loc, v) in [(start, n), (end, n + 1)] {
            match splits.iter_mut().find(|(a, _)| *a == loc.arc) {
                Some((_, s)) => {
                    s.push((loc.index, v));
                    s.sort_unstable();
                }
                None => splits.push((loc.arc, vec![(loc.index, v)])),
            }
        }
        Self { n, splits, sites: [(start.arc, start.index), (end.arc, end.index)] }
    }

    fn split_of(&self, arc: u32) -> Option<&[(u32, u32)]> {
        self.splits.iter().find(|(a, _)| *a == arc).map(|(_, s)| s.as_slice())
    }

    /// Calls `f(neighbor, weight, traversal)` for every edge out of `u`.
    fn for_each_edge(&self, wg: &WeightedGraph, u: u32, mut f: impl FnMut(u32, f64, Traversal)) {
        let g = wg.graph();
        if u >= self.n {
            let (arc, idx) = self.sites[(u - self.n) as usize];
            let s = self.split_of(arc).expect("virtual node sits on a split arc");
            let k = s.iter().position(|&(_, v)| v == u).expect("virtual node is listed");
            let a = g.arc(arc);
            let last = a.points.len() as u32 - 1;
            let (pi, pv) = if k > 0 { s[k - 1] } else { (0, a.ends[0]) };
            let (ni, nv) = if k + 1 < s.len() { s[k + 1] } else { (last, a.ends[1]) };
            f(pv, wg.partial_weight(arc, idx, pi), Traversal { arc, from: idx, to: pi });
            f(nv, wg.partial_weight(arc, idx, ni), Traversal { arc, from: idx, to: ni });
            return;
        }
        for &arc in g.incident_arcs(u) {
            let a = g.arc(arc);
            let last = a.points.len() as u32 - 1;
            match self.split_of(arc) {
                Some(s) => {
                    if a.ends[0] == u {
                        let (i, v) = s[0];
                        f(v, wg.partial_weight(arc, 0, i), Traversal { arc, from: 0, to: i });
                    }
                    if a.ends[1] == u {
                        let (i, v) = s[s.len() - 1];
                        f(v, wg.partial_weight(arc, last, i), Traversal { arc, from: last, to: i });
                    }
                }
                None => {
                    if a.ends[0] == a.ends[1] {
                        continue;
                    }
                    let (other, tr) = if a.ends[0] == u {
                        (a.ends[1], Traversal { arc, from: 0, to: last })
                    } else {
                        (a.ends[0], Traversal { arc, from: last, to: 0 })
                    };
                    f(other, wg.arc_weight(arc), tr);
                }
            }
        }
    }

    fn position(&self, g: &MscGraph, u: u32) -> Vec3 {
        if u >= self.n {
            let (arc, idx) = self.sites[(u - self.n) as usize];
            g.arc(arc).points[idx as usize]
        } else {
            g.node(u).position
        }
    }
}

#[derive(Clone, Copy)]
struct Open {
    f: f64,
    node: u32,
}

impl PartialEq for Open {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Open {
    fn cmp(&self, o: &Self) -> Ordering {
        self.f.total_cmp(&o.f).then(self.node.cmp(&o.node))
    }
}

/// Minimum-weight path between two graph locations.
pub fn shortest_path(
    wg: &WeightedGraph,
    start: &GraphLocation,
    end: &GraphLocation,
) -> Result<PathResult, PathError> {
    let g = wg.graph();
    if !start.is_valid_in(g) || !end.is_valid_in(g) {
        return Err(PathError::StaleLocation);
    }
    if (start.arc, start.index) == (end.arc, end.index) {
        return Ok(PathResult { points: vec![start.position], total_weight: 0.0, traversals: Vec::new() });
    }
    let ov = Overlay::new(g, start, end);
    let (s, t) = (ov.n, ov.n + 1);
    let total = ov.n as usize + 2;
    let spacing = g.spacing();
    let goal = mul(end.position, spacing);
    let eps = wg.epsilon();
    let h = |u: u32| eps * norm(sub(mul(ov.position(g, u), spacing), goal));

    let mut dist = vec![f64::INFINITY; total];
    let mut parent: Vec<Option<(u32, Traversal)>> = vec![None; total];
    let mut closed = vec![false; total];
    let mut open = BinaryHeap::new();
    dist[s as usize] = 0.0;
    open.push(Reverse(Open { f: h(s), node: s }));
    while let Some(Reverse(Open { node: u, .. })) = open.pop() {
        if closed[u as usize] {
            continue;
        }
        if u == t {
            break;
        }
        closed[u as usize] = true;
        let du = dist[u as usize];
        ov.for_each_edge(wg, u, |v, w, tr| {
            let nd = du + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                parent[v as usize] = Some((u, tr));
                open.push(Reverse(Open { f: nd + h(v), node: v }));
            }
        });
    }
    if !dist[t as usize].is_finite() {
        return Err(PathError::NoPath);
    }

    let mut traversals = Vec::new();
    let mut cur = t;
    while cur != s {
        let (p, tr) = parent[cur as usize].expect("reached nodes have parents");
        traversals.push(tr);
        cur = p;
    }
    traversals.reverse();
    let mut points = vec![start.position];
    for tr in &traversals {
        let pts = &g.arc(tr.arc).points;
        let mut push = |p: Vec3| {
            if points.last() != Some(&p) {
                points.push(p);
            }
        };
        if tr.from <= tr.to {
            pts[tr.from as usize..=tr.to as usize].iter().for_each(|&p| push(p));
        } else {
            pts[tr.to as usize..=tr.from as usize].iter().rev().for_each(|&p| push(p));
        }
    }
    Ok(PathResult { points, total_weight: dist[t as usize], traversals })
}
