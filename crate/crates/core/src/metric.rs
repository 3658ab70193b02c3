//! DIADEM-style trace scoring, deviation maps, and guide-point replay.
//!
//! The score is reference-anchored. Key nodes of the reference (root, branch
//! points, terminals) are matched greedily, in depth-first order, to the
//! nearest unused candidate node inside an axis-aligned tolerance: a disc of
//! radius `xy_threshold` in the XY plane and `z_threshold` along Z. A match
//! must also descend from the match of the closest matched key ancestor, so
//! a candidate that wanders onto the wrong branch does not get credit.
//!
//! Each non-root key node owns the reference segment back to its key parent.
//! That segment counts as matched when both of its key ends are matched.
//! Candidate terminal branches that contain no matched node are excess and
//! their weight is subtracted. Weights are path lengths, or 1 per segment
//! when length weighting is off.
//!
//! This follows the shape of the DIADEM metric but is not a certified
//! reimplementation of the official scorer.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::geom::{dist, point_segment_dist, Vec3};
use crate::pathing::shortest_path;
use crate::session::{NodeId, Reconstruction, TraceKind, TracingContext};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreParams {
    pub xy_threshold: f64,
    pub z_threshold: f64,
    pub length_weighted: bool,
    /// When set, candidate edges longer than this are subdivided before
    /// matching. Off by default, so finely sampled traces are scored as is.
    pub resample: Option<f64>,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { xy_threshold: 1.2, z_threshold: 5.0, length_weighted: true, resample: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeMatch {
    pub reference: NodeId,
    pub candidate: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreReport {
    pub score: f64,
    pub matched: usize,
    pub missed: usize,
    pub excess: usize,
    pub matched_weight: f64,
    pub total_weight: f64,
    pub excess_weight: f64,
    /// One entry per reference key node, in depth-first order.
    pub matches: Vec<NodeMatch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("reference trace is empty")]
    EmptyReference,
}

/// Tree view used by the scorer: children lists and key-node structure.
struct Tree<'a> {
    rec: &'a Reconstruction,
    children: BTreeMap<NodeId, Vec<NodeId>>,
}

impl<'a> Tree<'a> {
    fn new(rec: &'a Reconstruction) -> Self {
        Self { rec, children: rec.children() }
    }

    fn is_key(&self, id: NodeId) -> bool {
        self.rec.node(id).is_some_and(|n| n.parent.is_none()) || self.children[&id].len() != 1
    }

    fn position(&self, id: NodeId) -> Vec3 {
        self.rec.node(id).expect("node exists").position
    }

    /// Nearest key ancestor and the path length up to it.
    fn key_parent(&self, id: NodeId) -> Option<(NodeId, f64)> {
        let mut cur = id;
        let mut len = 0.0;
        loop {
            let p = self.rec.node(cur)?.parent?;
            len += dist(self.position(cur), self.position(p));
            if self.is_key(p) {
                return Some((p, len));
            }
            cur = p;
        }
    }

    fn key_nodes(&self) -> Vec<NodeId> {
        self.rec.dfs_order().into_iter().filter(|&id| self.is_key(id)).collect()
    }

    fn is_descendant(&self, mut id: NodeId, ancestor: NodeId) -> bool {
        while let Some(p) = self.rec.node(id).and_then(|n| n.parent) {
            if p == ancestor {
                return true;
            }
            id = p;
        }
        false
    }
}

/// Copy of `rec` with every edge longer than `step` split evenly so no
/// piece exceeds it. Node ids are reassigned in depth-first order.
pub fn resample(rec: &Reconstruction, step: f64) -> Reconstruction {
    let mut out = Reconstruction::new();
    let mut map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for id in rec.dfs_order() {
        let n = rec.node(id).expect("listed node");
        let parent = n.parent.map(|p| map[&p]);
        let mut pts = Vec::new();
        if let Some(p) = n.parent {
            let from = rec.node(p).expect("parent exists").position;
            let pieces = libm::ceil(dist(from, n.position) / step).max(1.0) as usize;
            for k in 1..pieces {
                let t = k as f64 / pieces as f64;
                pts.push(core::array::from_fn(|a| from[a] + t * (n.position[a] - from[a])));
            }
        }
        pts.push(n.position);
        let ids = out.append_chain(parent, &pts, n.kind).expect("finite points, known parent");
        map.insert(id, *ids.last().expect("non-empty chain"));
    }
    out
}

/// Scores `candidate` against `reference`.
pub fn score(candidate: &Reconstruction, reference: &Reconstruction, p: &ScoreParams) -> ScoreReport {
    let resampled;
    let candidate = match p.resample {
        Some(step) if step > 0.0 => {
            resampled = resample(candidate, step);
            &resampled
        }
        _ => candidate,
    };
    let rt = Tree::new(reference);
    let ct = Tree::new(candidate);
    let keys = rt.key_nodes();

    let mut used: BTreeMap<NodeId, NodeId> = BTreeMap::new(); // candidate -> reference
    let mut matched: BTreeMap<NodeId, NodeId> = BTreeMap::new(); // reference -> candidate
    let mut matches = Vec::with_capacity(keys.len());
    for &k in &keys {
        let kp = rt.position(k);
        let mut anchor = None;
        let mut up = rt.key_parent(k);
        while let Some((a, _)) = up {
            if let Some(&m) = matched.get(&a) {
                anchor = Some(m);
                break;
            }
            up = rt.key_parent(a);
        }
        let mut best: Option<(f64, NodeId)> = None;
        for c in candidate.nodes() {
            if used.contains_key(&c.id) {
                continue;
            }
            let d = [c.position[0] - kp[0], c.position[1] - kp[1], c.position[2] - kp[2]];
            if libm::sqrt(d[0] * d[0] + d[1] * d[1]) > p.xy_threshold || d[2].abs() > p.z_threshold {
                continue;
            }
            let dd = dist(c.position, kp);
            if best.is_some_and(|(bd, _)| dd >= bd) {
                continue;
            }
            if anchor.is_some_and(|a| !ct.is_descendant(c.id, a)) {
                continue;
            }
            best = Some((dd, c.id));
        }
        if let Some((_, c)) = best {
            used.insert(c, k);
            matched.insert(k, c);
        }
        matches.push(NodeMatch { reference: k, candidate: best.map(|b| b.1) });
    }

    let weight = |len: f64| if p.length_weighted { len } else { 1.0 };
    let (mut total, mut got, mut n_matched, mut n_missed) = (0.0, 0.0, 0, 0);
    for &k in &keys {
        let Some((kp, len)) = rt.key_parent(k) else { continue };
        total += weight(len);
        if matched.contains_key(&k) && matched.contains_key(&kp) {
            got += weight(len);
            n_matched += 1;
        } else {
            n_missed += 1;
        }
    }

    let (mut excess_w, mut n_excess) = (0.0, 0);
    for c in candidate.nodes() {
        if !ct.children[&c.id].is_empty() {
            continue;
        }
        let stop = ct.key_parent(c.id);
        let mut hit = used.contains_key(&c.id);
        let mut cur = c.id;
        while let Some(par) = candidate.node(cur).and_then(|n| n.parent) {
            if stop.is_some_and(|(s, _)| s == par) {
                break;
            }
            hit |= used.contains_key(&par);
            cur = par;
        }
        if !hit {
            n_excess += 1;
            excess_w += weight(stop.map_or(0.0, |s| s.1));
        }
    }

    let score = if total > 0.0 { ((got - excess_w) / total).clamp(0.0, 1.0) } else { 0.0 };
    ScoreReport {
        score,
        matched: n_matched,
        missed: n_missed,
        excess: n_excess,
        matched_weight: got,
        total_weight: total,
        excess_weight: excess_w,
        matches,
    }
}

/// Distance from every candidate node to the nearest reference segment
/// (or lone reference node).
pub fn deviation_map(candidate: &Reconstruction, reference: &Reconstruction) -> Result<Vec<(NodeId, f64)>, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let segments: Vec<(Vec3, Vec3)> = reference
        .nodes()
        .map(|n| match n.parent.and_then(|p| reference.node(p)) {
            Some(p) => (p.position, n.position),
            None => (n.position, n.position),
        })
        .collect();
    Ok(candidate
        .nodes()
        .map(|c| {
            let d = segments
                .iter()
                .map(|&(a, b)| point_segment_dist(c.position, a, b))
                .fold(f64::INFINITY, f64::min);
            (c.id, d)
        })
        .collect())
}

/// A simulated pair of clicks: trace from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GuideSegment {
    pub start_node: NodeId,
    pub end_node: NodeId,
    pub start: Vec3,
    pub end: Vec3,
}

/// Root, branch and terminal nodes of `reference` in depth-first order.
pub fn guide_points(reference: &Reconstruction) -> Vec<NodeId> {
    Tree::new(reference).key_nodes()
}

/// One segment per non-root key node, from its key parent, in depth-first
/// order. Together the segments cover every edge of the reference once.
pub fn extract_guide_points(reference: &Reconstruction) -> Result<Vec<GuideSegment>, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let t = Tree::new(reference);
    Ok(t.key_nodes()
        .into_iter()
        .filter_map(|k| {
            let (p, _) = t.key_parent(k)?;
            Some(GuideSegment { start_node: p, end_node: k, start: t.position(p), end: t.position(k) })
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub reconstruction: Reconstruction,
    /// Seconds spent on each segment, in input order.
    pub segment_seconds: Vec<f64>,
    pub total_seconds: f64,
    /// Indices of segments with no connecting path.
    pub failed: Vec<usize>,
}

/// Traces every guide segment with a shortest-path query, chaining each
/// segment onto the node where its start point was reached. `now` returns a
/// monotonic time in seconds.
pub fn replay(ctx: &TracingContext, segments: &[GuideSegment], now: &mut dyn FnMut() -> f64) -> ReplayReport {
    let t0 = now();
    let mut rec = Reconstruction::new();
    let mut reached: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut times = Vec::with_capacity(segments.len());
    let mut failed = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        let ts = now();
        let a = ctx.snap(s.start).location;
        let b = ctx.snap(s.end).location;
        match shortest_path(ctx.weighted(), &a, &b) {
            Ok(path) => {
                let parent = reached.get(&s.start_node).copied();
                let mut pts: Vec<Vec3> = path.points.iter().map(|&p| ctx.to_physical(p)).collect();
                if let Some(pid) = parent {
                    if rec.node(pid).is_some_and(|n| n.position == pts[0]) {
                        pts.remove(0);
                    }
                }
                if pts.is_empty() {
                    if let Some(pid) = parent {
                        reached.insert(s.end_node, pid);
                    }
                } else {
                    let ids = rec.append_chain(parent, &pts, TraceKind::Guided).expect("finite points, known parent");
                    if parent.is_none() {
                        reached.insert(s.start_node, ids[0]);
                    }
                    reached.insert(s.end_node, *ids.last().expect("non-empty chain"));
                }
            }
            Err(_) => failed.push(i),
        }
        times.push(now() - ts);
    }
    ReplayReport { reconstruction: rec, segment_seconds: times, total_seconds: now() - t0, failed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Root at the origin with `n` straight branches of length 10.
    fn star(n: usize) -> Reconstruction {
        let mut r = Reconstruction::new();
        let root = r.append_chain(None, &[[0.0; 3]], TraceKind::Manual).unwrap()[0];
        for b in 0..n {
            let a = b as f64 * core::f64::consts::TAU / n as f64;
            let pts: Vec<Vec3> =
                (1..=5).map(|s| [2.0 * s as f64 * libm::cos(a), 2.0 * s as f64 * libm::sin(a), 0.0]).collect();
            r.append_chain(Some(root), &pts, TraceKind::Manual).unwrap();
        }
        r
    }

    #[test]
    fn one_missing_branch_of_eight() {
        let reference = star(8);
        let p = ScoreParams::default();
        assert_eq!(score(&reference, &reference, &p).score, 1.0);
        assert_eq!(score(&Reconstruction::new(), &reference, &p).score, 0.0);
        let seven = Reconstruction::from_nodes(
            reference.nodes().filter(|n| !(37..=41).contains(&n.id)).cloned().collect(),
        )
        .unwrap();
        let r = score(&seven, &reference, &p);
        assert!((r.score - 0.875).abs() < 1e-3, "{r:?}");
        assert_eq!((r.matched, r.missed, r.excess), (7, 1, 0));
    }

    #[test]
    fn resampling_lets_a_long_edge_reach_a_terminal() {
        let mut reference = Reconstruction::new();
        reference.append_chain(None, &[[0.0; 3], [5.0, 0.0, 0.0], [10.0, 0.0, 0.0]], TraceKind::Manual).unwrap();
        let mut cand = Reconstruction::new();
        cand.append_chain(None, &[[0.0; 3], [12.0, 0.0, 0.0]], TraceKind::Guided).unwrap();
        let p = ScoreParams::default();
        assert_eq!(score(&cand, &reference, &p).score, 0.0);
        assert_eq!(score(&cand, &reference, &ScoreParams { resample: Some(0.5), ..p }).score, 1.0);

        let fine = resample(&cand, 0.5);
        assert_eq!(fine.len(), 25);
        assert_eq!(fine.roots().len(), 1);
        assert!(fine.nodes().all(|n| n.kind == TraceKind::Guided));
    }

    #[test]
    fn excess_branch_is_penalized() {
        let reference = star(4);
        let mut cand = star(4);
        let root = cand.roots()[0];
        cand.append_chain(Some(root), &[[0.0, 0.0, 20.0], [0.0, 0.0, 30.0]], TraceKind::Manual).unwrap();
        let r = score(&cand, &reference, &ScoreParams::default());
        assert_eq!(r.excess, 1);
        assert!(r.score < 1.0);
    }

    #[test]
    fn guide_segments_for_a_y() {
        let mut r = Reconstruction::new();
        let stem = r.append_chain(None, &[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], TraceKind::Manual).unwrap();
        r.append_chain(Some(stem[2]), &[[3.0, 1.0, 0.0]], TraceKind::Manual).unwrap();
        r.append_chain(Some(stem[2]), &[[3.0, -1.0, 0.0], [4.0, -2.0, 0.0]], TraceKind::Manual).unwrap();
        assert_eq!(guide_points(&r), vec![1, 3, 4, 6]);
        let segs = extract_guide_points(&r).unwrap();
        let pairs: Vec<(NodeId, NodeId)> = segs.iter().map(|s| (s.start_node, s.end_node)).collect();
        assert_eq!(pairs, vec![(1, 3), (3, 4), (3, 6)]);
        assert_eq!(extract_guide_points(&Reconstruction::new()), Err(MetricError::EmptyReference));
    }

    #[test]
    fn offset_trace_deviates_by_the_offset() {
        let mut r = Reconstruction::new();
        r.append_chain(None, &[[0.0; 3], [10.0, 0.0, 0.0]], TraceKind::Manual).unwrap();
        let mut c = Reconstruction::new();
        c.append_chain(None, &[[2.0, 0.5, 0.0], [5.0, 0.5, 0.0]], TraceKind::Manual).unwrap();
        let d = deviation_map(&c, &r).unwrap();
        assert!(d.iter().all(|&(_, x)| (x - 0.5).abs() < 1e-12));
    }
}
