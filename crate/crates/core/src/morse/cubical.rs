//! Implicit cubical complex over a voxel grid.
//!
//! Cells live on the doubled grid: a cell with coordinates `(a, b, c)` in
//! `[0, 2n - 1)` per axis has dimension equal to the number of odd
//! coordinates. Even coordinates are vertices (voxels).

use crate::geom::Vec3;

pub type CellId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubicalGrid {
    verts: [usize; 3],
    cells: [usize; 3],
}

impl CubicalGrid {
    pub fn new(dims: [usize; 3]) -> Self {
        let cells = [2 * dims[0] - 1, 2 * dims[1] - 1, 2 * dims[2] - 1];
        assert!(
            cells.iter().product::<usize>() < u32::MAX as usize,
            "grid too large for 32-bit cell ids"
        );
        Self { verts: dims, cells }
    }

    pub fn vertex_dims(&self) -> [usize; 3] {
        self.verts
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    #[inline]
    pub fn id(&self, c: [usize; 3]) -> CellId {
        (c[0] + self.cells[0] * (c[1] + self.cells[1] * c[2])) as CellId
    }

    #[inline]
    pub fn coords(&self, id: CellId) -> [usize; 3] {
        let id = id as usize;
        let x = id % self.cells[0];
        let r = id / self.cells[0];
        [x, r % self.cells[1], r / self.cells[1]]
    }

    #[inline]
    pub fn dim(&self, id: CellId) -> u8 {
        let c = self.coords(id);
        (c[0] & 1) as u8 + (c[1] & 1) as u8 + (c[2] & 1) as u8
    }

    /// Linear voxel index of the vertex cell at even doubled coordinates.
    #[inline]
    pub fn vertex_index(&self, c: [usize; 3]) -> usize {
        c[0] / 2 + self.verts[0] * (c[1] / 2 + self.verts[1] * (c[2] / 2))
    }

    #[inline]
    pub fn vertex_cell(&self, v: usize) -> CellId {
        let x = v % self.verts[0];
        let r = v / self.verts[0];
        self.id([2 * x, 2 * (r % self.verts[1]), 2 * (r / self.verts[1])])
    }

    /// Cell center in continuous voxel coordinates.
    #[inline]
    pub fn center(&self, id: CellId) -> Vec3 {
        let c = self.coords(id);
        [c[0] as f64 * 0.5, c[1] as f64 * 0.5, c[2] as f64 * 0.5]
    }

    /// Faces of dimension `d - 1` (always `2d` of them).
    pub fn faces(&self, id: CellId, out: &mut [CellId; 6]) -> usize {
        let c = self.coords(id);
        let mut n = 0;
        for a in 0..3 {
            if c[a] & 1 == 1 {
                let mut lo = c;
                lo[a] -= 1;
                let mut hi = c;
                hi[a] += 1;
                out[n] = self.id(lo);
                out[n + 1] = self.id(hi);
                n += 2;
            }
        }
        n
    }

    /// Cofaces of dimension `d + 1` inside the grid.
    pub fn cofaces(&self, id: CellId, out: &mut [CellId; 6]) -> usize {
        let c = self.coords(id);
        let mut n = 0;
        for a in 0..3 {
            if c[a] & 1 == 0 {
                if c[a] > 0 {
                    let mut lo = c;
                    lo[a] -= 1;
                    out[n] = self.id(lo);
                    n += 1;
                }
                if c[a] + 1 < self.cells[a] {
                    let mut hi = c;
                    hi[a] += 1;
                    out[n] = self.id(hi);
                    n += 1;
                }
            }
        }
        n
    }

    /// Linear voxel indices of the vertices of a cell (1, 2, 4 or 8 of them).
    pub fn vertices(&self, id: CellId, out: &mut [usize; 8]) -> usize {
        let c = self.coords(id);
        let mut n = 1;
        out[0] = 0;
        let mut base = c;
        let mut offsets = [0usize; 3];
        let strides = [1, self.verts[0], self.verts[0] * self.verts[1]];
        let mut k = 0;
        for a in 0..3 {
            if c[a] & 1 == 1 {
                base[a] -= 1;
                offsets[k] = strides[a];
                k += 1;
            }
        }
        let b = self.vertex_index(base);
        out[0] = b;
        for &off in &offsets[..k] {
            for i in 0..n {
                out[n + i] = out[i] + off;
            }
            n *= 2;
        }
        n
    }

    /// True when the cell lies in the boundary of the grid (some coordinate
    /// is at an extreme and even).
    pub fn on_boundary(&self, id: CellId) -> bool {
        let c = self.coords(id);
        (0..3).any(|a| self.cells[a] > 1 && (c[a] == 0 || c[a] + 1 == self.cells[a]))
    }
}
