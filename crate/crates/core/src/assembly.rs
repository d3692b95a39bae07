//! Sparse assembly of the velocity mass and stiffness matrices, the
//! divergence matrix, the pressure mass matrix and the pressure-mean vector.
//!
//! Matrices are stored unconstrained: boundary velocity rows and columns keep
//! their assembled entries. The Dirichlet elimination is applied when the
//! saddle-point system is formed (see [`crate::linsolve`]), so the matrices
//! here are the plain Galerkin matrices of the bilinear forms
//! `(u, v)`, `(grad u, grad v)` and `b(v, q) = -(div v, q)`.

use crate::error::{Result, StokesError};
use crate::fem_space::{ElementKind, SpatialQuadrature, TabulatedShapes, TaylorHoodSpace};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the sparsity pattern given by (unsorted, possibly
    /// repeated) column lists per row.
    pub fn from_pattern(n_cols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for cols in rows.iter_mut() {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(column, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| span.start + k)
    }

    /// Adds `v` to entry `(r, c)`, which must be part of the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y = A^T x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Checks offsets, index ranges and strict ordering within rows.
    pub fn check_structure(&self) -> bool {
        self.row_ptr.len() == self.n_rows + 1
            && self.row_ptr[0] == 0
            && self.row_ptr.windows(2).all(|w| w[0] <= w[1])
            && *self.row_ptr.last().unwrap() == self.col_idx.len()
            && self.col_idx.len() == self.values.len()
            && (0..self.n_rows).all(|r| {
                let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
                cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&c| c < self.n_cols)
            })
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut defect = 0.0f64;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                defect = defect.max((v - self.get(c, r)).abs());
            }
        }
        if scale > 0.0 {
            defect / scale
        } else {
            defect
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }
}

/// The discrete operators of the Stokes problem on a Taylor–Hood space.
#[derive(Debug, Clone)]
pub struct StokesOperators {
    /// Velocity mass matrix, `n_u x n_u`.
    pub mass: CsrMatrix,
    /// Velocity stiffness matrix `(grad u, grad v)`, `n_u x n_u`.
    pub stiffness: CsrMatrix,
    /// Divergence matrix `b(v, q) = -(div v, q)`, `n_p x n_u`.
    pub divergence: CsrMatrix,
    /// Pressure mass matrix, `n_p x n_p`.
    pub pressure_mass: CsrMatrix,
    /// Integrals of the pressure basis functions.
    pub mean: Vec<f64>,
    /// Dirichlet mask over velocity DOFs.
    pub boundary: Vec<bool>,
}

impl StokesOperators {
    pub fn n_velocity(&self) -> usize {
        self.mass.n_rows()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure_mass.n_rows()
    }

    /// Copy of `v` with boundary velocity entries set to zero.
    pub fn zero_boundary(&self, mut v: Vec<f64>) -> Vec<f64> {
        for (x, &b) in v.iter_mut().zip(&self.boundary) {
            if b {
                *x = 0.0;
            }
        }
        v
    }

    /// Discrete divergence `B v` with boundary columns removed.
    pub fn divergence_of(&self, v: &[f64]) -> Vec<f64> {
        let masked = self.zero_boundary(v.to_vec());
        self.divergence.mul_vec(&masked)
    }

    /// Discrete mean `m^T q` of a pressure vector.
    pub fn pressure_mean(&self, q: &[f64]) -> f64 {
        self.mean.iter().zip(q).map(|(a, b)| a * b).sum()
    }
}

fn cell_geometry(space: &TaylorHoodSpace, cell: usize) -> ([f64; 2], [f64; 2], f64) {
    let (lo, size) = space.mesh().cell_box(cell);
    (lo, [1.0 / size[0], 1.0 / size[1]], size[0] * size[1])
}

/// Assembles all operators with the given cell quadrature, which needs at
/// least three points per axis.
pub fn assemble_operators(space: &TaylorHoodSpace, quad: &SpatialQuadrature) -> Result<StokesOperators> {
    let per_axis = (quad.len() as f64).sqrt().round() as usize;
    if per_axis < 3 {
        return Err(StokesError::UnsupportedQuadrature(per_axis));
    }
    let n_u = space.n_velocity();
    let n_p = space.n_pressure();
    let n_cells = space.mesh().num_cells();

    let mut vv_rows: Vec<Vec<usize>> = vec![Vec::new(); n_u];
    let mut pv_rows: Vec<Vec<usize>> = vec![Vec::new(); n_p];
    let mut pp_rows: Vec<Vec<usize>> = vec![Vec::new(); n_p];
    for cell in 0..n_cells {
        let vd = space.velocity_cell_dofs(cell);
        let pd = space.pressure_cell_dofs(cell);
        for comp in 0..2 {
            let block = &vd[9 * comp..9 * comp + 9];
            for &r in block {
                vv_rows[r].extend_from_slice(block);
            }
        }
        for &r in pd {
            pv_rows[r].extend_from_slice(vd);
            pp_rows[r].extend_from_slice(pd);
        }
    }
    let mut mass = CsrMatrix::from_pattern(n_u, vv_rows);
    let mut stiffness = mass.clone();
    let mut divergence = CsrMatrix::from_pattern(n_u, pv_rows);
    let mut pressure_mass = CsrMatrix::from_pattern(n_p, pp_rows);
    let mut mean = vec![0.0; n_p];

    let q2 = TabulatedShapes::new(ElementKind::Q2, quad);
    let q1 = TabulatedShapes::new(ElementKind::Q1, quad);

    for cell in 0..n_cells {
        let (_, jinv, det) = cell_geometry(space, cell);
        let mut m9 = [[0.0; 9]; 9];
        let mut k9 = [[0.0; 9]; 9];
        let mut b = [[0.0; 18]; 4];
        let mut m4 = [[0.0; 4]; 4];
        let mut mean4 = [0.0; 4];
        for (qp, &w) in quad.weights.iter().enumerate() {
            let w = w * det;
            let phi = &q2.values[qp];
            let dphi: Vec<[f64; 2]> = q2.gradients[qp]
                .iter()
                .map(|g| [g[0] * jinv[0], g[1] * jinv[1]])
                .collect();
            let psi = &q1.values[qp];
            for i in 0..9 {
                for j in 0..9 {
                    m9[i][j] += w * phi[i] * phi[j];
                    k9[i][j] += w * (dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1]);
                }
            }
            for a in 0..4 {
                for i in 0..9 {
                    b[a][i] -= w * dphi[i][0] * psi[a];
                    b[a][9 + i] -= w * dphi[i][1] * psi[a];
                }
                for c in 0..4 {
                    m4[a][c] += w * psi[a] * psi[c];
                }
                mean4[a] += w * psi[a];
            }
        }

        let vd = space.velocity_cell_dofs(cell);
        let pd = space.pressure_cell_dofs(cell);
        for comp in 0..2 {
            for i in 0..9 {
                for j in 0..9 {
                    let (r, c) = (vd[9 * comp + i], vd[9 * comp + j]);
                    mass.add(r, c, m9[i][j]);
                    stiffness.add(r, c, k9[i][j]);
                }
            }
        }
        for a in 0..4 {
            for (i, &c) in vd.iter().enumerate() {
                divergence.add(pd[a], c, b[a][i]);
            }
            for c in 0..4 {
                pressure_mass.add(pd[a], pd[c], m4[a][c]);
            }
            mean[pd[a]] += mean4[a];
        }
    }

    Ok(StokesOperators {
        mass,
        stiffness,
        divergence,
        pressure_mass,
        mean,
        boundary: space.velocity_boundary_mask(),
    })
}

/// Load vector `(f, phi_i)` for a vector field `f`; boundary entries are zero.
pub fn assemble_load(space: &TaylorHoodSpace, quad: &SpatialQuadrature, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let q2 = TabulatedShapes::new(ElementKind::Q2, quad);
    let mut out = vec![0.0; space.n_velocity()];
    for cell in 0..space.mesh().num_cells() {
        let (lo, jinv, det) = cell_geometry(space, cell);
        let vd = space.velocity_cell_dofs(cell);
        for (qp, (&p, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
            let x = [lo[0] + p[0] / jinv[0], lo[1] + p[1] / jinv[1]];
            let fx = f(x);
            let w = w * det;
            for i in 0..9 {
                let phi = q2.values[qp][i];
                out[vd[i]] += w * fx[0] * phi;
                out[vd[9 + i]] += w * fx[1] * phi;
            }
        }
    }
    zero_masked(space, out)
}

/// Load vector `(I_h f, phi_i)` of the nodal Q2 interpolant of `f`, using the
/// assembled mass matrix; boundary entries are zero.
pub fn interpolated_load(space: &TaylorHoodSpace, ops: &StokesOperators, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let fh = space.sample_velocity(f);
    zero_masked(space, ops.mass.mul_vec(&fh))
}

/// Load vector `(grad g, grad phi_i)` for a vector field given through its
/// gradient `grad_g(x)[c][d] = d g_c / d x_d`; boundary entries are zero.
pub fn assemble_gradient_load(
    space: &TaylorHoodSpace,
    quad: &SpatialQuadrature,
    grad_g: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> Vec<f64> {
    let q2 = TabulatedShapes::new(ElementKind::Q2, quad);
    let mut out = vec![0.0; space.n_velocity()];
    for cell in 0..space.mesh().num_cells() {
        let (lo, jinv, det) = cell_geometry(space, cell);
        let vd = space.velocity_cell_dofs(cell);
        for (qp, (&p, &w)) in quad.points.iter().zip(&quad.weights).enumerate() {
            let x = [lo[0] + p[0] / jinv[0], lo[1] + p[1] / jinv[1]];
            let g = grad_g(x);
            let w = w * det;
            for i in 0..9 {
                let r = q2.gradients[qp][i];
                let d = [r[0] * jinv[0], r[1] * jinv[1]];
                out[vd[i]] += w * (g[0][0] * d[0] + g[0][1] * d[1]);
                out[vd[9 + i]] += w * (g[1][0] * d[0] + g[1][1] * d[1]);
            }
        }
    }
    zero_masked(space, out)
}

fn zero_masked(space: &TaylorHoodSpace, mut v: Vec<f64>) -> Vec<f64> {
    for (d, x) in v.iter_mut().enumerate() {
        if space.is_boundary_velocity_dof(d) {
            *x = 0.0;
        }
    }
    v
}
