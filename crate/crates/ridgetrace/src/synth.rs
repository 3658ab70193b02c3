//! Deterministic synthetic data: gapped tubes, branching neurites, noise,
//! and graph-aligned reference traces.

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ridgetrace_core::geom::{dist, Vec3};
use ridgetrace_core::pathing::WeightedGraph;
use ridgetrace_core::session::{Reconstruction, TraceKind};
use ridgetrace_core::volume::ScalarVolume;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeParams {
    pub dims: [usize; 3],
    /// Full intensity radius; intensity falls linearly to 0 one voxel further.
    pub radius: f64,
    pub peak: f64,
    pub background: f64,
    /// Intensity inside a gap, as a fraction of `peak`.
    pub gap_level: f64,
    /// Fraction of voxels replaced by uniform noise in `0..=255`.
    pub speckle: f64,
}

impl Default for TubeParams {
    fn default() -> Self {
        Self { dims: [64, 64, 64], radius: 1.5, peak: 200.0, background: 10.0, gap_level: 0.1, speckle: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct TubeVolume {
    pub volume: ScalarVolume,
    /// Centerline samples in voxel coordinates, about 0.25 voxels apart.
    pub centerline: Vec<Vec3>,
    /// `(start, end)` arc-length intervals, in voxels, that were dimmed.
    pub gaps: Vec<(f64, f64)>,
}

impl TubeVolume {
    pub fn start(&self) -> Vec3 {
        self.centerline[0]
    }
    pub fn end(&self) -> Vec3 {
        *self.centerline.last().expect("centerline has samples")
    }

    /// Centerline samples `s` voxels of arc length in from either end.
    pub fn inset(&self, s: f64) -> (Vec3, Vec3) {
        let walk = |pts: &mut dyn Iterator<Item = &Vec3>| {
            let mut prev = *pts.next().expect("centerline has samples");
            let mut acc = 0.0;
            for &p in pts {
                acc += dist(prev, p);
                prev = p;
                if acc >= s {
                    break;
                }
            }
            prev
        };
        (walk(&mut self.centerline.iter()), walk(&mut self.centerline.iter().rev()))
    }

    /// Distance from `p` to the nearest centerline sample.
    pub fn distance_to_centerline(&self, p: Vec3) -> f64 {
        self.centerline.iter().map(|&c| dist(c, p)).fold(f64::INFINITY, f64::min)
    }
}

/// A smooth curve through `knots`, sampled every ~0.25 voxels
/// (Catmull-Rom through the knots).
pub fn spline(knots: &[Vec3]) -> Vec<Vec3> {
    let mut out = vec![knots[0]];
    for i in 0..knots.len() - 1 {
        let p0 = knots[i.saturating_sub(1)];
        let (p1, p2) = (knots[i], knots[i + 1]);
        let p3 = knots[(i + 2).min(knots.len() - 1)];
        let steps = (dist(p1, p2) * 4.0).ceil().max(1.0) as usize;
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let (t2, t3) = (t * t, t * t * t);
            out.push(std::array::from_fn(|a| {
                0.5 * (2.0 * p1[a]
                    + (p2[a] - p0[a]) * t
                    + (2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a]) * t2
                    + (3.0 * p1[a] - p0[a] - 3.0 * p2[a] + p3[a]) * t3)
            }));
        }
    }
    out
}

/// Paints tubes around polylines: every voxel takes the intensity of its
/// nearest centerline sample (scaled by that sample's level) times the
/// radial profile. Levels are per sample, in `[0, 1]`.
pub fn paint_tubes(dims: [usize; 3], lines: &[(Vec<Vec3>, Vec<f64>)], p: &TubeParams) -> Vec<f64> {
    let n = dims[0] * dims[1] * dims[2];
    let mut best = vec![(f64::INFINITY, 0.0f64); n];
    let reach = p.radius + 1.0;
    for (line, levels) in lines {
        for (c, &lvl) in line.iter().zip(levels) {
            let lo: Vec<usize> = (0..3).map(|a| (c[a] - reach - 1.0).floor().max(0.0) as usize).collect();
            let hi: Vec<usize> = (0..3).map(|a| ((c[a] + reach + 1.0).ceil() as usize).min(dims[a] - 1)).collect();
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let d = dist([x as f64, y as f64, z as f64], *c);
                        let i = x + dims[0] * (y + dims[1] * z);
                        if d < best[i].0 {
                            best[i] = (d, lvl);
                        }
                    }
                }
            }
        }
    }
    best.iter()
        .map(|&(d, lvl)| {
            let profile = (reach - d).clamp(0.0, 1.0);
            p.background + (p.peak - p.background) * profile * lvl
        })
        .collect()
}

fn add_speckle(rng: &mut impl Rng, values: &mut [f64], fraction: f64) {
    let n = values.len();
    for _ in 0..(n as f64 * fraction).round() as usize {
        values[rng.gen_range(0..n)] = rng.gen_range(0.0..=255.0);
    }
}

/// One wandering tube from near x = 8 to near x = nx − 8 with `gaps`
/// dimmed stretches of 1 to 4 voxels each.
pub fn gapped_tube(seed: u64, gaps: usize, p: &TubeParams) -> TubeVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [nx, ny, nz] = p.dims;
    let margin = 8.0;
    let knots: Vec<Vec3> = (0..6)
        .map(|k| {
            let t = k as f64 / 5.0;
            [
                margin + t * (nx as f64 - 2.0 * margin),
                rng.gen_range(margin..ny as f64 - margin),
                rng.gen_range(margin..nz as f64 - margin),
            ]
        })
        .collect();
    let line = spline(&knots);
    let mut arclen = vec![0.0];
    for w in line.windows(2) {
        arclen.push(arclen.last().unwrap() + dist(w[0], w[1]));
    }
    let total = *arclen.last().unwrap();
    // gaps sit in disjoint slots along the middle of the tube
    let slot = (total - 20.0) / gaps.max(1) as f64;
    let gap_list: Vec<(f64, f64)> = (0..gaps)
        .map(|g| {
            let width = rng.gen_range(1..=4) as f64;
            let s = 10.0 + g as f64 * slot + rng.gen_range(0.0..(slot - width).max(0.0));
            (s, s + width)
        })
        .collect();
    let levels: Vec<f64> = arclen
        .iter()
        .map(|&s| if gap_list.iter().any(|&(a, b)| s >= a && s < b) { p.gap_level } else { 1.0 })
        .collect();
    let mut values = paint_tubes(p.dims, &[(line.clone(), levels)], p);
    add_speckle(&mut rng, &mut values, p.speckle);
    let volume = ScalarVolume::new(p.dims, [1.0; 3], values).expect("finite synthetic volume");
    TubeVolume { volume, centerline: line, gaps: gap_list }
}

/// Randomly branching neurites filling a volume, plus speckle.
pub fn neurite_volume(seed: u64, dims: [usize; 3], spacing: Vec3, trees: usize, p: &TubeParams) -> ScalarVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inside = |q: Vec3| (0..3).all(|a| q[a] >= 2.0 && q[a] <= dims[a] as f64 - 3.0);
    let mut lines = Vec::new();
    for _ in 0..trees {
        let root: Vec3 = std::array::from_fn(|a| rng.gen_range(4.0..dims[a] as f64 - 4.0));
        let mut stack = vec![(root, 0usize)];
        while let Some((start, depth)) = stack.pop() {
            let mut knots = vec![start];
            let mut dir: Vec3 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            for _ in 0..rng.gen_range(3..7) {
                dir = std::array::from_fn(|a| dir[a] + rng.gen_range(-0.6..0.6));
                let len = ridgetrace_core::geom::norm(dir).max(1e-6);
                let q: Vec3 = std::array::from_fn(|a| knots.last().unwrap()[a] + 5.0 * dir[a] / len);
                if !inside(q) {
                    break;
                }
                knots.push(q);
            }
            if knots.len() < 2 {
                continue;
            }
            let line = spline(&knots);
            let levels = line.iter().map(|_| rng.gen_range(0.6..1.0)).collect();
            if depth < 3 {
                for _ in 0..rng.gen_range(1..=2) {
                    stack.push((knots[rng.gen_range(1..knots.len())], depth + 1));
                }
            }
            lines.push((line, levels));
        }
    }
    let mut values = paint_tubes(dims, &lines, p);
    add_speckle(&mut rng, &mut values, p.speckle);
    ScalarVolume::new(dims, spacing, values).expect("finite synthetic volume")
}

/// Uniform noise in `[0, 1)`.
pub fn noise_volume(seed: u64, dims: [usize; 3], spacing: Vec3) -> ScalarVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..dims[0] * dims[1] * dims[2]).map(|_| rng.gen()).collect();
    ScalarVolume::new(dims, spacing, values).expect("finite noise")
}

/// Two Gaussian blobs joined by a bridge of height `bridge` at the midpoint.
pub fn two_blobs(dims: [usize; 3], peaks: [f64; 2], bridge: f64) -> ScalarVolume {
    let c = [dims[0] as f64 / 4.0, dims[0] as f64 * 3.0 / 4.0];
    let (my, mz) = (dims[1] as f64 / 2.0, dims[2] as f64 / 2.0);
    ScalarVolume::from_fn(dims, [1.0; 3], |x, y, z| {
        let r2 = (y as f64 - my).powi(2) + (z as f64 - mz).powi(2);
        let along = |cx: f64| (-(x as f64 - cx).powi(2) / 8.0).exp();
        let core = peaks[0] * along(c[0]) + peaks[1] * along(c[1]);
        let x = x as f64;
        let mid = if x > c[0] && x < c[1] { bridge } else { 0.0 };
        core.max(mid) * (-r2 / 8.0).exp()
    })
    .expect("finite blobs")
}

/// A reference trace made of whole graph arcs: the shortest-path tree from
/// node `root`, grown in settle order until it has at least `min_segments`
/// guide segments (or the component runs out). Subpaths of shortest paths
/// are shortest, so replaying its guide points retraces it.
pub fn shortest_path_tree_reference(wg: &WeightedGraph, root: u32, min_segments: usize) -> Reconstruction {
    let g = wg.graph();
    let n = g.nodes().len();
    let mut d = vec![f64::INFINITY; n];
    let mut via: Vec<Option<u32>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    d[root as usize] = 0.0;
    heap.push(Reverse((Key(0.0), root)));
    let mut order = Vec::new();
    while let Some(Reverse((Key(du), u))) = heap.pop() {
        if done[u as usize] {
            continue;
        }
        done[u as usize] = true;
        order.push(u);
        for &a in g.incident_arcs(u) {
            let arc = g.arc(a);
            let v = if arc.ends[0] == u { arc.ends[1] } else { arc.ends[0] };
            let nd = du + wg.arc_weight(a);
            if nd < d[v as usize] {
                d[v as usize] = nd;
                via[v as usize] = Some(a);
                heap.push(Reverse((Key(nd), v)));
            }
        }
    }
    let mut take = min_segments.min(order.len());
    loop {
        let rec = tree_from_order(wg, root, &order[..take], &via);
        let segments = ridgetrace_core::metric::guide_points(&rec).len() - 1;
        if segments >= min_segments || take == order.len() {
            return rec;
        }
        take = (take + take / 2 + 1).min(order.len());
    }
}

fn tree_from_order(wg: &WeightedGraph, root: u32, order: &[u32], via: &[Option<u32>]) -> Reconstruction {
    let g = wg.graph();
    let mut rec = Reconstruction::new();
    let mut at = vec![None; g.nodes().len()];
    at[root as usize] = Some(
        rec.append_chain(None, &[g.to_physical(g.node(root).position)], TraceKind::Manual).expect("finite")[0],
    );
    for &v in &order[1..] {
        let a = via[v as usize].expect("settled nodes have a tree arc");
        let arc = g.arc(a);
        let u = if arc.ends[1] == v { arc.ends[0] } else { arc.ends[1] };
        let mut pts: Vec<Vec3> = arc.points.iter().map(|&p| g.to_physical(p)).collect();
        if arc.ends[0] == v {
            pts.reverse();
        }
        let ids = rec.append_chain(at[u as usize], &pts[1..], TraceKind::Manual).expect("finite");
        at[v as usize] = ids.last().copied();
    }
    rec
}

#[derive(Clone, Copy)]
struct Key(f64);
impl PartialEq for Key {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}
