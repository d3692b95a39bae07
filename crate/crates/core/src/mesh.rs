//! Uniform quadrilateral meshes of the unit square.
//!
//! Vertices are numbered lexicographically with the x index running fastest,
//! so vertex `(i, j)` has index `j * (n + 1) + i`. Cells are numbered the same
//! way and list their vertices counterclockwise starting at the lower-left
//! corner.

use crate::error::{Result, StokesError};

const BOUNDARY_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredQuadMesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 4]>,
    boundary: Vec<bool>,
}

impl StructuredQuadMesh {
    /// Builds the `n x n` subdivision of the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(StokesError::InvalidResolution(n));
        }
        let side = n + 1;
        let inv = 1.0 / n as f64;

        let mut vertices = Vec::with_capacity(side * side);
        let mut boundary = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                // Integer endpoints keep 0 and 1 exact.
                let x = if i == n { 1.0 } else { i as f64 * inv };
                let y = if j == n { 1.0 } else { j as f64 * inv };
                vertices.push([x, y]);
                boundary.push(on_boundary(x) || on_boundary(y));
            }
        }

        let mut cells = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let v0 = j * side + i;
                cells.push([v0, v0 + 1, v0 + side + 1, v0 + side]);
            }
        }

        Ok(Self {
            n,
            vertices,
            cells,
            boundary,
        })
    }

    /// Uniform refinement: every cell is split into four.
    pub fn refine(&self) -> Self {
        Self::unit_square(2 * self.n).expect("doubling a valid resolution stays valid")
    }

    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell diameter, the diagonal of a square cell.
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n as f64
    }

    /// Lower-left corner and edge lengths of a cell.
    pub fn cell_box(&self, cell: usize) -> ([f64; 2], [f64; 2]) {
        let [v0, _, v2, _] = self.cells[cell];
        let lo = self.vertices[v0];
        let hi = self.vertices[v2];
        (lo, [hi[0] - lo[0], hi[1] - lo[1]])
    }

    /// Area of a cell computed from its vertex polygon (shoelace formula).
    pub fn cell_area(&self, cell: usize) -> f64 {
        let c = &self.cells[cell];
        let mut twice = 0.0;
        for k in 0..4 {
            let a = self.vertices[c[k]];
            let b = self.vertices[c[(k + 1) % 4]];
            twice += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * twice
    }

    /// Index of the cell containing `p`, together with the reference
    /// coordinates of `p` in that cell. Points on interior edges are assigned
    /// to the cell with the larger index.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 2])> {
        let [x, y] = p;
        let inside = |v: f64| (-BOUNDARY_EPS..=1.0 + BOUNDARY_EPS).contains(&v);
        if !(inside(x) && inside(y)) {
            return Err(StokesError::PointOutsideDomain { x, y });
        }
        let n = self.n as f64;
        let i = ((x * n).floor().max(0.0) as usize).min(self.n - 1);
        let j = ((y * n).floor().max(0.0) as usize).min(self.n - 1);
        let xi = (x * n - i as f64).clamp(0.0, 1.0);
        let eta = (y * n - j as f64).clamp(0.0, 1.0);
        Ok((j * self.n + i, [xi, eta]))
    }
}

fn on_boundary(c: f64) -> bool {
    c.abs() <= BOUNDARY_EPS || (c - 1.0).abs() <= BOUNDARY_EPS
}
