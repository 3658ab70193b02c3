//! The 2-saddle/maximum part of the Morse-Smale complex: arc tracing,
//! saddle-saddle connectivity and persistence simplification.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use super::cubical::{CellId, CubicalGrid};
use super::gradient::DiscreteGradient;

/// Where an ascending arc ends: a maximum (node index) or the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Endpoint {
    Max(u32),
    Boundary,
}

/// One ascending arc out of a 2-saddle, as the chain of cells it visits
/// (the saddle first; the maximum or the boundary exit face last).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcEnd {
    pub target: Endpoint,
    pub cells: Vec<CellId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub cell: CellId,
    /// 1 (1-saddle), 2 (2-saddle) or 3 (maximum).
    pub index: u8,
    pub value: f64,
    /// Rank of the cell's highest vertex; breaks value ties.
    pub rank: u32,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub saddle: CellId,
    pub max: CellId,
    pub persistence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancellationKind {
    SaddleMax,
    SaddleSaddle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cancellation {
    pub kind: CancellationKind,
    pub lower: CellId,
    pub upper: CellId,
    pub persistence: f64,
}

/// Persistence threshold as a fraction of the function range.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimplifyParams {
    pub persistence_threshold: f64,
}

impl Default for SimplifyParams {
    fn default() -> Self {
        Self { persistence_threshold: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct MorseComplex {
    grid: CubicalGrid,
    values: Vec<f64>,
    ranks: Vec<u32>,
    range: f64,
    nodes: Vec<CriticalPoint>,
    /// Indexed by node; `Some` for 2-saddles.
    ends: Vec<Option<[ArcEnd; 2]>>,
    /// For maxima: incident `(saddle, side)` entries, possibly stale.
    incident: Vec<Vec<(u32, u8)>>,
    /// 2-saddle -> 1-saddle V-path counts.
    down: Vec<BTreeMap<u32, u32>>,
    /// 1-saddle -> 2-saddle V-path counts.
    up: Vec<BTreeMap<u32, u32>>,
    cancellations: Vec<Cancellation>,
}

impl MorseComplex {
    /// Traces all 2-saddle/maximum arcs and 1-saddle/2-saddle connections of
    /// `g`.
    pub fn extract(g: &DiscreteGradient) -> Self {
        let grid = *g.grid();
        let nodes: Vec<CriticalPoint> = g
            .critical_cells()
            .into_iter()
            .filter(|&c| grid.dim(c) > 0)
            .map(|c| CriticalPoint {
                cell: c,
                index: grid.dim(c),
                value: g.cell_value(c),
                rank: g.cell_rank(c),
                alive: true,
            })
            .collect();
        let (lo, hi) = g
            .vertex_values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mut mc = MorseComplex {
            grid,
            values: g.vertex_values().to_vec(),
            ranks: g.vertex_ranks().to_vec(),
            range: if hi > lo { hi - lo } else { 0.0 },
            ends: vec![None; nodes.len()],
            incident: vec![Vec::new(); nodes.len()],
            down: vec![BTreeMap::new(); nodes.len()],
            up: vec![BTreeMap::new(); nodes.len()],
            nodes,
            cancellations: Vec::new(),
        };

        let mut tracer = DescentScratch::new(grid.num_cells());
        for n in 0..mc.nodes.len() {
            if mc.nodes[n].index != 2 {
                continue;
            }
            let sigma = mc.nodes[n].cell;
            let ends = [0u8, 1].map(|side| mc.trace_ascending(g, sigma, side));
            for (side, end) in ends.iter().enumerate() {
                if let Endpoint::Max(m) = end.target {
                    mc.incident[m as usize].push((n as u32, side as u8));
                }
            }
            mc.ends[n] = Some(ends);

            for (tau, count) in tracer.saddle_connections(g, sigma) {
                let u = mc.node_of(tau).expect("critical 1-cell is a node");
                mc.down[n].insert(u, count);
                mc.up[u as usize].insert(n as u32, count);
            }
        }
        mc
    }

    fn trace_ascending(&self, g: &DiscreteGradient, sigma: CellId, side: u8) -> ArcEnd {
        let mut co = [0; 6];
        let k = self.grid.cofaces(sigma, &mut co);
        let mut cells = vec![sigma];
        if (side as usize) >= k {
            return ArcEnd { target: Endpoint::Boundary, cells };
        }
        let mut beta = co[side as usize];
        let limit = self.grid.num_cells();
        loop {
            cells.push(beta);
            if g.is_critical(beta) {
                let m = self.node_of(beta).expect("critical 3-cell is a node");
                return ArcEnd { target: Endpoint::Max(m), cells };
            }
            let alpha = g.downward_partner(beta).expect("non-critical 3-cell pairs with a face");
            cells.push(alpha);
            let k = self.grid.cofaces(alpha, &mut co);
            match co[..k].iter().copied().find(|&c| c != beta) {
                Some(next) => beta = next,
                None => return ArcEnd { target: Endpoint::Boundary, cells },
            }
            assert!(cells.len() <= limit, "V-path cycle while tracing from {sigma}");
        }
    }

    pub fn grid(&self) -> &CubicalGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[CriticalPoint] {
        &self.nodes
    }

    /// Node index of a critical cell.
    pub fn node_of(&self, cell: CellId) -> Option<u32> {
        self.nodes.binary_search_by_key(&cell, |n| n.cell).ok().map(|i| i as u32)
    }

    /// Both ascending arcs of a 2-saddle node.
    pub fn saddle_arcs(&self, node: u32) -> Option<&[ArcEnd; 2]> {
        self.ends.get(node as usize)?.as_ref()
    }

    /// Value span of the field the complex was computed on.
    pub fn function_range(&self) -> f64 {
        self.range
    }

    /// Value of any cell (the value of its highest vertex).
    pub fn cell_value(&self, c: CellId) -> f64 {
        let mut buf = [0usize; 8];
        let n = self.grid.vertices(c, &mut buf);
        let v = *buf[..n].iter().max_by_key(|&&v| self.ranks[v]).expect("cells have vertices");
        self.values[v]
    }

    pub fn alive(&self, index: u8) -> impl Iterator<Item = (u32, &CriticalPoint)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.alive && n.index == index)
            .map(|(i, n)| (i as u32, n))
    }

    /// Cells of the surviving maxima, in increasing order.
    pub fn alive_maxima(&self) -> Vec<CellId> {
        self.alive(3).map(|(_, n)| n.cell).collect()
    }

    pub fn alive_saddles(&self) -> Vec<CellId> {
        self.alive(2).map(|(_, n)| n.cell).collect()
    }

    /// 1-saddle/2-saddle V-path counts of a 2-saddle node.
    pub fn saddle_connections(&self, node: u32) -> &BTreeMap<u32, u32> {
        &self.down[node as usize]
    }

    pub fn cancellations(&self) -> &[Cancellation] {
        &self.cancellations
    }

    /// The full 2-saddle/maximum persistence hierarchy: every maximum paired
    /// with the saddle at which it is absorbed by an older component.
    ///
    /// Computed by exhaustive saddle-max cancellation in persistence order
    /// on a copy of the arc endpoints; `self` is unchanged.
    pub fn persistence_pairs(&self) -> Vec<PersistencePair> {
        let mut targets: Vec<[Endpoint; 2]> = self
            .ends
            .iter()
            .map(|e| match e {
                Some([a, b]) => [a.target, b.target],
                None => [Endpoint::Boundary; 2],
            })
            .collect();
        let mut alive: Vec<bool> = self.nodes.iter().map(|n| n.alive).collect();
        let mut incident = self.incident.clone();
        let mut heap = BinaryHeap::new();
        for (s, n) in self.nodes.iter().enumerate() {
            if n.alive && n.index == 2 {
                self.push_saddle_max(&mut heap, s as u32, &targets[s]);
            }
        }
        let mut pairs = Vec::new();
        while let Some(Reverse(c)) = heap.pop() {
            let (s, m) = (c.a as usize, c.b as usize);
            if !alive[s] || !alive[m] {
                continue;
            }
            let Some(side) = cancellable_side(&targets[s], m as u32) else { continue };
            let other = targets[s][1 - side];
            alive[s] = false;
            alive[m] = false;
            pairs.push(PersistencePair {
                saddle: self.nodes[s].cell,
                max: self.nodes[m].cell,
                persistence: c.persistence,
            });
            let moved = core::mem::take(&mut incident[m]);
            for (s2, side2) in moved {
                let s2u = s2 as usize;
                if !alive[s2u] || targets[s2u][side2 as usize] != Endpoint::Max(m as u32) {
                    continue;
                }
                targets[s2u][side2 as usize] = other;
                if let Endpoint::Max(o) = other {
                    incident[o as usize].push((s2, side2));
                }
                let t = targets[s2u];
                self.push_saddle_max(&mut heap, s2, &t);
            }
        }
        pairs
    }

    fn push_saddle_max(&self, heap: &mut BinaryHeap<Reverse<Candidate>>, s: u32, t: &[Endpoint; 2]) {
        if t[0] == t[1] {
            return;
        }
        for e in t {
            if let Endpoint::Max(m) = *e {
                heap.push(Reverse(self.candidate(CancellationKind::SaddleMax, s, m)));
            }
        }
    }

    fn candidate(&self, kind: CancellationKind, a: u32, b: u32) -> Candidate {
        let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
        Candidate {
            persistence: (nb.value - na.value).abs(),
            drank: (nb.rank as i64 - na.rank as i64).abs(),
            kind: kind as u8,
            a,
            b,
        }
    }

    /// Cancels critical pairs in increasing persistence order until none
    /// remains with persistence at most `threshold * range`.
    ///
    /// Saddle-max pairs are cancelled when the saddle reaches the maximum
    /// along exactly one arc; the maximum's other saddles are rerouted through
    /// the cancelled saddle. 1-saddle/2-saddle pairs are cancelled when they
    /// are joined by exactly one V-path and the 2-saddle does not separate two
    /// components of the saddle-max hierarchy. Minimum-side pairs are left
    /// alone since they do not touch the extracted arcs.
    pub fn simplify(&mut self, p: &SimplifyParams) {
        let t = p.persistence_threshold;
        if t.is_nan() || t <= 0.0 {
            return;
        }
        let limit = t * self.range;
        let mut merge = vec![false; self.nodes.len()];
        for pair in self.persistence_pairs() {
            if let Some(s) = self.node_of(pair.saddle) {
                merge[s as usize] = true;
            }
        }

        let mut heap = BinaryHeap::new();
        for s in 0..self.nodes.len() as u32 {
            let n = &self.nodes[s as usize];
            if !n.alive || n.index != 2 {
                continue;
            }
            let targets = self.targets(s);
            self.push_saddle_max(&mut heap, s, &targets);
            if !merge[s as usize] {
                for (&u, &count) in &self.down[s as usize] {
                    if count == 1 {
                        heap.push(Reverse(self.candidate(CancellationKind::SaddleSaddle, u, s)));
                    }
                }
            }
        }

        let mut splicer = Splicer::new(self.grid.num_cells());
        while let Some(Reverse(c)) = heap.pop() {
            if c.persistence > limit {
                break;
            }
            let (a, b) = (c.a, c.b);
            if !self.nodes[a as usize].alive || !self.nodes[b as usize].alive {
                continue;
            }
            if c.kind == CancellationKind::SaddleMax as u8 {
                let Some(side) = cancellable_side(&self.targets(a), b) else { continue };
                let rerouted = self.cancel_saddle_max(a, b, side, &mut splicer);
                for s2 in rerouted {
                    let t = self.targets(s2);
                    self.push_saddle_max(&mut heap, s2, &t);
                }
                self.record(CancellationKind::SaddleMax, a, b, c.persistence);
            } else {
                if merge[b as usize] || self.down[b as usize].get(&a) != Some(&1) {
                    continue;
                }
                for (s2, u2) in self.cancel_saddle_saddle(a, b) {
                    if !merge[s2 as usize] && self.down[s2 as usize].get(&u2) == Some(&1) {
                        heap.push(Reverse(self.candidate(CancellationKind::SaddleSaddle, u2, s2)));
                    }
                }
                self.record(CancellationKind::SaddleSaddle, a, b, c.persistence);
            }
        }
    }

    fn record(&mut self, kind: CancellationKind, a: u32, b: u32, persistence: f64) {
        self.cancellations.push(Cancellation {
            kind,
            lower: self.nodes[a as usize].cell,
            upper: self.nodes[b as usize].cell,
            persistence,
        });
    }

    fn targets(&self, s: u32) -> [Endpoint; 2] {
        match &self.ends[s as usize] {
            Some([a, b]) => [a.target, b.target],
            None => [Endpoint::Boundary; 2],
        }
    }

    /// Removes saddle `s` and maximum `m` (reached from `s` on `side`).
    /// Returns the saddles whose arcs were rerouted.
    fn cancel_saddle_max(&mut self, s: u32, m: u32, side: usize, splicer: &mut Splicer) -> Vec<u32> {
        let [e0, e1] = self.ends[s as usize].take().expect("saddle has arcs");
        let (to_m, to_other) = if side == 0 { (e0, e1) } else { (e1, e0) };
        let other = to_other.target;
        if let Endpoint::Max(o) = other {
            self.incident[o as usize].retain(|&(x, _)| x != s);
        }
        // path from m back down to s, then up to `other`
        let mut bridge: Vec<CellId> = to_m.cells.iter().rev().copied().collect();
        splicer.splice(&mut bridge, &to_other.cells);

        let mut rerouted = Vec::new();
        for (s2, side2) in core::mem::take(&mut self.incident[m as usize]) {
            if s2 == s || !self.nodes[s2 as usize].alive {
                continue;
            }
            let Some(ends) = self.ends[s2 as usize].as_mut() else { continue };
            let end = &mut ends[side2 as usize];
            if end.target != Endpoint::Max(m) {
                continue;
            }
            splicer.splice(&mut end.cells, &bridge);
            end.target = other;
            if let Endpoint::Max(o) = other {
                self.incident[o as usize].push((s2, side2));
            }
            rerouted.push(s2);
        }
        for u in core::mem::take(&mut self.down[s as usize]).into_keys() {
            self.up[u as usize].remove(&s);
        }
        self.nodes[s as usize].alive = false;
        self.nodes[m as usize].alive = false;
        rerouted.sort_unstable();
        rerouted.dedup();
        rerouted
    }

    /// Removes 1-saddle `u` and 2-saddle `s`, connecting every other 2-saddle
    /// above `u` to every other 1-saddle below `s`. Returns the new
    /// `(2-saddle, 1-saddle)` connections.
    fn cancel_saddle_saddle(&mut self, u: u32, s: u32) -> Vec<(u32, u32)> {
        let above: Vec<(u32, u32)> = core::mem::take(&mut self.up[u as usize])
            .into_iter()
            .filter(|&(x, _)| x != s)
            .collect();
        let below: Vec<(u32, u32)> = core::mem::take(&mut self.down[s as usize])
            .into_iter()
            .filter(|&(x, _)| x != u)
            .collect();
        for &(s2, _) in &above {
            self.down[s2 as usize].remove(&u);
        }
        for &(u2, _) in &below {
            self.up[u2 as usize].remove(&s);
        }
        if let Some(ends) = self.ends[s as usize].take() {
            for e in ends {
                if let Endpoint::Max(m) = e.target {
                    self.incident[m as usize].retain(|&(x, _)| x != s);
                }
            }
        }
        let mut touched = Vec::new();
        for &(s2, c) in &above {
            for &(u2, d) in &below {
                let k = c.saturating_mul(d);
                let e = self.down[s2 as usize].entry(u2).or_insert(0);
                *e = e.saturating_add(k);
                let e = self.up[u2 as usize].entry(s2).or_insert(0);
                *e = e.saturating_add(k);
                touched.push((s2, u2));
            }
        }
        self.nodes[u as usize].alive = false;
        self.nodes[s as usize].alive = false;
        touched
    }
}

/// Side of `targets` that reaches `m`, if `m` is reached along exactly one of
/// the two arcs.
fn cancellable_side(targets: &[Endpoint; 2], m: u32) -> Option<usize> {
    let hit = targets.map(|t| t == Endpoint::Max(m));
    match hit {
        [true, false] => Some(0),
        [false, true] => Some(1),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    persistence: f64,
    drank: i64,
    kind: u8,
    a: u32,
    b: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.persistence
            .total_cmp(&other.persistence)
            .then(self.drank.cmp(&other.drank))
            .then(self.kind.cmp(&other.kind))
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Joins cell paths that meet end-to-start, dropping the back-and-forth
/// overlap and any loop the join creates.
struct Splicer {
    seen: Vec<u32>,
    stamp: u32,
}

impl Splicer {
    fn new(n: usize) -> Self {
        Self { seen: vec![0; n], stamp: 0 }
    }

    fn splice(&mut self, a: &mut Vec<CellId>, b: &[CellId]) {
        debug_assert_eq!(a.last(), b.first());
        let mut i = 1;
        while a.len() >= 2 && i < b.len() && a[a.len() - 2] == b[i] {
            a.pop();
            i += 1;
        }
        a.extend_from_slice(&b[i..]);
        self.remove_loops(a);
    }

    fn remove_loops(&mut self, path: &mut Vec<CellId>) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
        let mut pos: BTreeMap<CellId, usize> = BTreeMap::new();
        let mut out: Vec<CellId> = Vec::with_capacity(path.len());
        for &c in path.iter() {
            if self.seen[c as usize] == self.stamp {
                let keep = pos[&c];
                for dropped in out.drain(keep + 1..) {
                    self.seen[dropped as usize] = 0;
                    pos.remove(&dropped);
                }
                continue;
            }
            self.seen[c as usize] = self.stamp;
            pos.insert(c, out.len());
            out.push(c);
        }
        *path = out;
    }
}

/// Scratch buffers for counting descending V-paths from a 2-saddle to the
/// 1-saddles below it.
struct DescentScratch {
    stamp: Vec<u32>,
    count: Vec<u32>,
    generation: u32,
}

impl DescentScratch {
    fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], count: vec![0; n], generation: 0 }
    }

    /// `(critical 1-cell, number of V-paths)` for every 1-saddle reachable
    /// from `sigma` through 1/2-cell pairs.
    fn saddle_connections(&mut self, g: &DiscreteGradient, sigma: CellId) -> Vec<(CellId, u32)> {
        self.generation += 1;
        let gen = self.generation;
        let grid = g.grid();
        let mut faces = [0; 6];

        // Successor 2-cells of a 2-cell along descending V-paths.
        let step = |x: CellId, faces: &mut [CellId; 6]| -> ([Option<CellId>; 4], [Option<CellId>; 4]) {
            let skip = g.downward_partner(x);
            let n = grid.faces(x, faces);
            let mut next = [None; 4];
            let mut crit = [None; 4];
            for (i, &tau) in faces[..n].iter().enumerate() {
                if Some(tau) == skip {
                    continue;
                }
                if g.is_critical(tau) {
                    crit[i] = Some(tau);
                } else if let Some(y) = g.upward_partner(tau) {
                    if y != x {
                        next[i] = Some(y);
                    }
                }
            }
            (next, crit)
        };

        // Post-order DFS to get a topological order of the reachable DAG.
        let mut order = Vec::new();
        let mut stack: Vec<(CellId, u8)> = vec![(sigma, 0)];
        self.stamp[sigma as usize] = gen;
        while let Some(&(x, i)) = stack.last() {
            let (next, _) = step(x, &mut faces);
            let mut idx = i as usize;
            let mut pushed = None;
            while idx < 4 {
                let y = next[idx];
                idx += 1;
                if let Some(y) = y {
                    if self.stamp[y as usize] != gen {
                        self.stamp[y as usize] = gen;
                        pushed = Some(y);
                        break;
                    }
                }
            }
            if let Some(top) = stack.last_mut() {
                top.1 = idx as u8;
            }
            match pushed {
                Some(y) => stack.push((y, 0)),
                None => {
                    order.push(x);
                    stack.pop();
                }
            }
        }

        for &x in &order {
            self.count[x as usize] = 0;
        }
        self.count[sigma as usize] = 1;
        let mut result: BTreeMap<CellId, u32> = BTreeMap::new();
        for &x in order.iter().rev() {
            let c = self.count[x as usize];
            if c == 0 {
                continue;
            }
            let (next, crit) = step(x, &mut faces);
            for y in next.into_iter().flatten() {
                self.count[y as usize] = self.count[y as usize].saturating_add(c);
            }
            for tau in crit.into_iter().flatten() {
                let e = result.entry(tau).or_insert(0);
                *e = e.saturating_add(c);
            }
        }
        result.into_iter().collect()
    }
}
