//! Nearest-point and radius queries over every arc geometry point.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geom::{mul, norm2, sub, Vec3};
use crate::morse::MscGraph;

/// A point on the graph: an arc and an index into its geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraphLocation {
    pub arc: u32,
    pub index: u32,
    /// Voxel coordinates of the referenced point.
    pub position: Vec3,
}

impl GraphLocation {
    /// Location of point `index` on `arc`, if it exists.
    pub fn on(g: &MscGraph, arc: u32, index: u32) -> Option<Self> {
        let a = g.arcs().get(arc as usize)?;
        let p = *a.points.get(index as usize)?;
        Some(Self { arc, index, position: p })
    }

    /// Whether this location still points at the same geometry in `g`.
    pub fn is_valid_in(&self, g: &MscGraph) -> bool {
        Self::on(g, self.arc, self.index).is_some_and(|l| l.position == self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Nearest {
    pub location: GraphLocation,
    /// Physical distance to the query point.
    pub distance: f64,
}

/// A maximal run of consecutive arc points inside a query ball.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fragment {
    pub arc: u32,
    /// First and last point index, inclusive.
    pub start: u32,
    pub end: u32,
    /// Voxel coordinates of points `start..=end`.
    pub points: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SpatialError {
    #[error("graph has no geometry to index")]
    EmptyGraph,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    phys: Vec3,
    pos: Vec3,
    arc: u32,
    index: u32,
}

impl Entry {
    fn key(&self) -> (u32, u32) {
        (self.arc, self.index)
    }
}

/// Balanced k-d tree stored implicitly: the median of each range is the
/// node, with its split axis kept alongside.
#[derive(Debug, Clone)]
pub struct KdIndex {
    spacing: Vec3,
    entries: Vec<Entry>,
    axes: Vec<u8>,
}

impl KdIndex {
    pub fn build(g: &MscGraph) -> Result<Self, SpatialError> {
        let spacing = g.spacing();
        let mut entries: Vec<Entry> = g
            .arcs()
            .iter()
            .enumerate()
            .flat_map(|(a, arc)| {
                arc.points.iter().enumerate().map(move |(i, &p)| Entry {
                    phys: mul(p, spacing),
                    pos: p,
                    arc: a as u32,
                    index: i as u32,
                })
            })
            .collect();
        if entries.is_empty() {
            return Err(SpatialError::EmptyGraph);
        }
        let mut axes = alloc::vec![0u8; entries.len()];
        build_range(&mut entries, &mut axes);
        Ok(Self { spacing, entries, axes })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    /// Closest geometry point to physical position `p`; ties go to the
    /// lowest `(arc, index)`.
    pub fn nearest(&self, p: Vec3) -> Nearest {
        let mut best = (f64::INFINITY, (u32::MAX, u32::MAX), 0usize);
        self.nearest_in(0, self.entries.len(), p, &mut best);
        let e = &self.entries[best.2];
        Nearest {
            location: GraphLocation {
                arc: e.arc,
                index: e.index,
                position: e.pos,
            },
            distance: libm::sqrt(best.0),
        }
    }

    fn nearest_in(&self, lo: usize, hi: usize, p: Vec3, best: &mut (f64, (u32, u32), usize)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let e = &self.entries[mid];
        let d2 = norm2(sub(e.phys, p));
        if d2 < best.0 || (d2 == best.0 && e.key() < best.1) {
            *best = (d2, e.key(), mid);
        }
        let axis = self.axes[mid] as usize;
        let delta = p[axis] - e.phys[axis];
        let (near, far) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.nearest_in(near.0, near.1, p, best);
        if delta * delta <= best.0 {
            self.nearest_in(far.0, far.1, p, best);
        }
    }

    /// `(arc, index)` of every point within physical distance `r` of `p`,
    /// sorted.
    pub fn within(&self, p: Vec3, r: f64) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        if r >= 0.0 {
            self.within_in(0, self.entries.len(), p, r * r, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_in(&self, lo: usize, hi: usize, p: Vec3, r2: f64, out: &mut Vec<(u32, u32)>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let e = &self.entries[mid];
        if norm2(sub(e.phys, p)) <= r2 {
            out.push(e.key());
        }
        let axis = self.axes[mid] as usize;
        let delta = p[axis] - e.phys[axis];
        if delta <= 0.0 || delta * delta <= r2 {
            self.within_in(lo, mid, p, r2, out);
        }
        if delta >= 0.0 || delta * delta <= r2 {
            self.within_in(mid + 1, hi, p, r2, out);
        }
    }

    /// Points within `r` of `p`, grouped into maximal runs per arc.
    pub fn radius_query(&self, g: &MscGraph, p: Vec3, r: f64) -> Vec<Fragment> {
        group_fragments(g, &self.within(p, r))
    }
}

/// Groups sorted `(arc, index)` hits into runs of consecutive indices.
pub fn group_fragments(g: &MscGraph, hits: &[(u32, u32)]) -> Vec<Fragment> {
    let mut out: Vec<Fragment> = Vec::new();
    for &(arc, i) in hits {
        let p = g.arc(arc).points[i as usize];
        match out.last_mut() {
            Some(f) if f.arc == arc && f.end + 1 == i => {
                f.end = i;
                f.points.push(p);
            }
            _ => out.push(Fragment { arc, start: i, end: i, points: alloc::vec![p] }),
        }
    }
    out
}

fn build_range(entries: &mut [Entry], axes: &mut [u8]) {
    let n = entries.len();
    if n <= 1 {
        return;
    }
    // split on the axis of widest spread
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for e in entries.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(e.phys[a]);
            hi[a] = hi[a].max(e.phys[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap_or(0);
    let mid = n / 2;
    entries.select_nth_unstable_by(mid, |x, y| cmp_on(x, y, axis));
    axes[mid] = axis as u8;
    let (left, right) = entries.split_at_mut(mid);
    let (la, ra) = axes.split_at_mut(mid);
    build_range(left, la);
    build_range(&mut right[1..], &mut ra[1..]);
}

fn cmp_on(x: &Entry, y: &Entry, axis: usize) -> Ordering {
    x.phys[axis].total_cmp(&y.phys[axis]).then(x.key().cmp(&y.key()))
}
