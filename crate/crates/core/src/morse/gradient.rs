//! Discrete gradient on the cubical complex, built one vertex lower star at a
//! time.
//!
//! Vertex values are made distinct by ranking on `(value, linear index)`. A
//! cell's value is the value of its highest-ranked vertex, so every cell
//! belongs to the lower star of exactly one vertex and the stars can be
//! processed independently. Minima come out as critical 0-cells and maxima as
//! critical 3-cells.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::cubical::{CellId, CubicalGrid};
use crate::volume::ScalarVolume;

#[derive(Debug, Clone)]
pub struct DiscreteGradient {
    grid: CubicalGrid,
    values: Vec<f64>,
    ranks: Vec<u32>,
    /// `pair[c] == c` marks a critical cell.
    pair: Vec<CellId>,
}

/// Ranks of vertices under the `(value, index)` total order.
pub fn vertex_ranks(values: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a as usize].total_cmp(&values[b as usize]).then(a.cmp(&b))
    });
    let mut ranks = vec![0u32; values.len()];
    for (r, &v) in order.iter().enumerate() {
        ranks[v as usize] = r as u32;
    }
    ranks
}

/// Builds the gradient of `v` with the lower-star algorithm.
pub fn build_gradient(v: &ScalarVolume) -> DiscreteGradient {
    let grid = CubicalGrid::new(v.dims());
    let ranks = vertex_ranks(v.values());
    let mut pair = vec![CellId::MAX; grid.num_cells()];
    let [nx, ny, nz] = v.dims();

    let plane = |z: usize| {
        let mut out = Vec::new();
        let mut star = LowerStar::default();
        for y in 0..ny {
            for x in 0..nx {
                star.process(&grid, &ranks, [x, y, z], &mut out);
            }
        }
        out
    };

    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<(CellId, CellId)>> = {
        use rayon::prelude::*;
        (0..nz).into_par_iter().map(plane).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<(CellId, CellId)>> = (0..nz).map(plane).collect();

    for chunk in chunks {
        for (a, b) in chunk {
            pair[a as usize] = b;
            pair[b as usize] = a;
        }
    }
    debug_assert!(pair.iter().all(|&p| p != CellId::MAX));
    DiscreteGradient { grid, values: v.values().to_vec(), ranks, pair }
}

impl DiscreteGradient {
    pub fn grid(&self) -> &CubicalGrid {
        &self.grid
    }

    pub fn vertex_values(&self) -> &[f64] {
        &self.values
    }

    pub fn vertex_ranks(&self) -> &[u32] {
        &self.ranks
    }

    #[inline]
    pub fn is_critical(&self, c: CellId) -> bool {
        self.pair[c as usize] == c
    }

    /// The cell `c` is paired with, if it is not critical.
    #[inline]
    pub fn partner(&self, c: CellId) -> Option<CellId> {
        let p = self.pair[c as usize];
        (p != c).then_some(p)
    }

    /// Highest-ranked vertex of the cell.
    pub fn max_vertex(&self, c: CellId) -> usize {
        let mut buf = [0usize; 8];
        let n = self.grid.vertices(c, &mut buf);
        *buf[..n].iter().max_by_key(|&&v| self.ranks[v]).expect("cells have vertices")
    }

    pub fn cell_rank(&self, c: CellId) -> u32 {
        self.ranks[self.max_vertex(c)]
    }

    pub fn cell_value(&self, c: CellId) -> f64 {
        self.values[self.max_vertex(c)]
    }

    /// All critical cells in increasing id order.
    pub fn critical_cells(&self) -> Vec<CellId> {
        (0..self.pair.len() as CellId).filter(|&c| self.is_critical(c)).collect()
    }

    /// Number of critical cells of each dimension `(c0, c1, c2, c3)`.
    pub fn morse_vector(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for c in 0..self.pair.len() as CellId {
            if self.is_critical(c) {
                counts[self.grid.dim(c) as usize] += 1;
            }
        }
        counts
    }

    /// `c0 - c1 + c2 - c3`.
    pub fn euler_characteristic(&self) -> i64 {
        let m = self.morse_vector();
        m[0] as i64 - m[1] as i64 + m[2] as i64 - m[3] as i64
    }

    /// Checks that pairing is an involution between a cell and one of its
    /// faces or cofaces, and that pairs stay within a single lower star.
    pub fn check_pairing(&self) -> Result<(), PairingError> {
        let mut faces = [0; 6];
        for c in 0..self.pair.len() as CellId {
            let p = self.pair[c as usize];
            if self.pair[p as usize] != c {
                return Err(PairingError::NotInvolution(c));
            }
            if p == c {
                continue;
            }
            let (lo, hi) = if self.grid.dim(p) < self.grid.dim(c) { (p, c) } else { (c, p) };
            let n = self.grid.faces(hi, &mut faces);
            if !faces[..n].contains(&lo) {
                return Err(PairingError::NotIncident(c, p));
            }
            if self.max_vertex(lo) != self.max_vertex(hi) {
                return Err(PairingError::CrossesStars(c, p));
            }
        }
        Ok(())
    }

    /// True when no V-path, in any dimension, returns to a cell it has
    /// already visited.
    pub fn is_acyclic(&self) -> bool {
        // Successors of a d-cell `a` paired upward with `b`: the d-faces of `b`
        // other than `a`. Iterative three-colour DFS over each layer.
        let n = self.pair.len();
        let mut color = vec![0u8; n];
        let mut stack: Vec<(CellId, u8)> = Vec::new();
        let mut faces = [0; 6];
        for start in 0..n as CellId {
            if color[start as usize] != 0 {
                continue;
            }
            stack.push((start, 0));
            color[start as usize] = 1;
            while let Some(&(cell, next)) = stack.last() {
                let mut idx = next as usize;
                let mut descend = None;
                if let Some(b) = self.upward_partner(cell) {
                    let k = self.grid.faces(b, &mut faces);
                    while idx < k {
                        let f = faces[idx];
                        idx += 1;
                        if f == cell {
                            continue;
                        }
                        match color[f as usize] {
                            0 => {
                                descend = Some(f);
                                break;
                            }
                            1 => return false,
                            _ => {}
                        }
                    }
                }
                if let Some(top) = stack.last_mut() {
                    top.1 = idx as u8;
                }
                match descend {
                    Some(f) => {
                        color[f as usize] = 1;
                        stack.push((f, 0));
                    }
                    None => {
                        color[cell as usize] = 2;
                        stack.pop();
                    }
                }
            }
        }
        true
    }

    /// The coface `c` is paired with, if any.
    #[inline]
    pub fn upward_partner(&self, c: CellId) -> Option<CellId> {
        self.partner(c).filter(|&p| self.grid.dim(p) > self.grid.dim(c))
    }

    /// The face `c` is paired with, if any.
    #[inline]
    pub fn downward_partner(&self, c: CellId) -> Option<CellId> {
        self.partner(c).filter(|&p| self.grid.dim(p) < self.grid.dim(c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PairingError {
    #[error("pairing of cell {0} is not symmetric")]
    NotInvolution(CellId),
    #[error("cells {0} and {1} are paired but not incident")]
    NotIncident(CellId, CellId),
    #[error("cells {0} and {1} are paired across two lower stars")]
    CrossesStars(CellId, CellId),
}

const UNCLASSIFIED: u8 = 0;
const PAIRED: u8 = 1;
const CRITICAL: u8 = 2;

/// Scratch state for one vertex lower star: the 27 cells of the 3x3x3
/// doubled-grid block around the vertex.
#[derive(Default)]
struct LowerStar {
    present: [bool; 27],
    ids: [CellId; 27],
    /// Vertex ranks in decreasing order, padded; `klen` entries are valid.
    keys: [[u32; 8]; 27],
    klen: [u8; 27],
    state: [u8; 27],
    pq_one: Vec<u8>,
    pq_zero: Vec<u8>,
}

#[inline]
fn local(o: [i32; 3]) -> usize {
    ((o[0] + 1) + 3 * (o[1] + 1) + 9 * (o[2] + 1)) as usize
}

#[inline]
fn offset(l: usize) -> [i32; 3] {
    [(l % 3) as i32 - 1, ((l / 3) % 3) as i32 - 1, (l / 9) as i32 - 1]
}

impl LowerStar {
    fn process(
        &mut self,
        grid: &CubicalGrid,
        ranks: &[u32],
        vox: [usize; 3],
        out: &mut Vec<(CellId, CellId)>,
    ) {
        let centre = [2 * vox[0], 2 * vox[1], 2 * vox[2]];
        let cdims = grid.cell_dims();
        let vrank = ranks[grid.vertex_index(centre)];
        let mut verts = [0usize; 8];
        for l in 0..27 {
            self.present[l] = false;
            self.state[l] = UNCLASSIFIED;
            let o = offset(l);
            let mut c = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let v = centre[a] as i64 + o[a] as i64;
                if v < 0 || v >= cdims[a] as i64 {
                    inside = false;
                    break;
                }
                c[a] = v as usize;
            }
            if !inside {
                continue;
            }
            let id = grid.id(c);
            let n = grid.vertices(id, &mut verts);
            let mut key = [0u32; 8];
            let mut in_star = true;
            for (k, &v) in verts[..n].iter().enumerate() {
                let r = ranks[v];
                if r > vrank {
                    in_star = false;
                    break;
                }
                key[k] = r;
            }
            if !in_star {
                continue;
            }
            key[..n].sort_unstable_by(|a, b| b.cmp(a));
            self.present[l] = true;
            self.ids[l] = id;
            self.keys[l] = key;
            self.klen[l] = n as u8;
        }

        let centre_l = local([0, 0, 0]);
        let edges: Vec<u8> = (0..27u8)
            .filter(|&l| self.present[l as usize] && dim_of(l as usize) == 1)
            .collect();
        if edges.is_empty() {
            self.state[centre_l] = CRITICAL;
            out.push((self.ids[centre_l], self.ids[centre_l]));
            return;
        }
        let delta = *edges
            .iter()
            .min_by(|&&a, &&b| self.cmp_key(a as usize, b as usize))
            .expect("non-empty");
        self.pair(centre_l, delta as usize, out);
        self.pq_zero.clear();
        self.pq_one.clear();
        self.pq_zero.extend(edges.iter().copied().filter(|&e| e != delta));
        self.push_cofaces(delta as usize);

        while !self.pq_one.is_empty() || !self.pq_zero.is_empty() {
            while let Some(alpha) = self.pop_min(true) {
                if self.state[alpha] != UNCLASSIFIED {
                    continue;
                }
                match self.unpaired_faces(alpha) {
                    (0, _) => self.pq_zero.push(alpha as u8),
                    (_, face) => {
                        self.pair(face, alpha, out);
                        self.pq_zero.retain(|&z| z as usize != face);
                        self.push_cofaces(alpha);
                        self.push_cofaces(face);
                    }
                }
            }
            if let Some(gamma) = self.pop_min(false) {
                if self.state[gamma] != UNCLASSIFIED {
                    continue;
                }
                self.state[gamma] = CRITICAL;
                out.push((self.ids[gamma], self.ids[gamma]));
                self.push_cofaces(gamma);
            }
        }
        debug_assert!((0..27).all(|l| !self.present[l] || self.state[l] != UNCLASSIFIED));
    }

    fn pair(&mut self, lo: usize, hi: usize, out: &mut Vec<(CellId, CellId)>) {
        self.state[lo] = PAIRED;
        self.state[hi] = PAIRED;
        out.push((self.ids[lo], self.ids[hi]));
    }

    fn cmp_key(&self, a: usize, b: usize) -> Ordering {
        let ka = &self.keys[a][..self.klen[a] as usize];
        let kb = &self.keys[b][..self.klen[b] as usize];
        ka.cmp(kb)
    }

    fn pop_min(&mut self, one: bool) -> Option<usize> {
        let q = if one { &self.pq_one } else { &self.pq_zero };
        let (pos, _) = q
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| self.cmp_key(a as usize, b as usize))?;
        let q = if one { &mut self.pq_one } else { &mut self.pq_zero };
        Some(q.swap_remove(pos) as usize)
    }

    /// Number of unclassified faces of `l` inside the lower star, and the last
    /// such face found.
    fn unpaired_faces(&self, l: usize) -> (usize, usize) {
        let o = offset(l);
        let mut count = 0;
        let mut last = usize::MAX;
        for a in 0..3 {
            if o[a] != 0 {
                let mut f = o;
                f[a] = 0;
                let fl = local(f);
                if self.present[fl] && self.state[fl] == UNCLASSIFIED {
                    count += 1;
                    last = fl;
                }
            }
        }
        (count, last)
    }

    fn push_cofaces(&mut self, l: usize) {
        let o = offset(l);
        for a in 0..3 {
            if o[a] != 0 {
                continue;
            }
            for s in [-1, 1] {
                let mut c = o;
                c[a] = s;
                let cl = local(c);
                if self.present[cl]
                    && self.state[cl] == UNCLASSIFIED
                    && self.unpaired_faces(cl).0 == 1
                {
                    self.pq_one.push(cl as u8);
                }
            }
        }
    }
}

#[inline]
fn dim_of(l: usize) -> usize {
    offset(l).iter().filter(|&&x| x != 0).count()
}
