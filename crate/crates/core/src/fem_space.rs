//! Q1/Q2 reference elements and the Taylor–Hood (Q2 velocity, Q1 pressure)
//! space on a structured mesh.
//!
//! Velocity unknowns are blocked by component: DOF `c * n_q2 + k` is
//! component `c` at Q2 node `k`. Q2 nodes live on the `(2n+1) x (2n+1)` grid
//! of half-cell points, numbered lexicographically with x fastest. Pressure
//! unknowns coincide with mesh vertices.

use crate::error::{Result, StokesError};
use crate::mesh::StructuredQuadMesh;

pub use crate::quadrature::{gauss_rule_2d, GaussRule1d, SpatialQuadrature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Q1,
    Q2,
}

impl ElementKind {
    pub fn num_nodes(self) -> usize {
        match self {
            ElementKind::Q1 => 4,
            ElementKind::Q2 => 9,
        }
    }

    /// Reference node coordinates in local order. Q1 nodes run
    /// counterclockwise from the origin; Q2 nodes are tensor-ordered,
    /// `k = 3 * b + a` at `(a / 2, b / 2)`.
    pub fn nodes(self) -> Vec<[f64; 2]> {
        match self {
            ElementKind::Q1 => Q1_NODES.to_vec(),
            ElementKind::Q2 => (0..9).map(|k| [(k % 3) as f64 * 0.5, (k / 3) as f64 * 0.5]).collect(),
        }
    }
}

const Q1_NODES: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

/// Shape function values and reference gradients at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEval {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
}

fn lin(x: f64) -> ([f64; 2], [f64; 2]) {
    ([1.0 - x, x], [-1.0, 1.0])
}

fn quad(x: f64) -> ([f64; 3], [f64; 3]) {
    (
        [2.0 * (x - 0.5) * (x - 1.0), -4.0 * x * (x - 1.0), 2.0 * x * (x - 0.5)],
        [4.0 * x - 3.0, 4.0 - 8.0 * x, 4.0 * x - 1.0],
    )
}

/// Evaluates all shape functions of `kind` at a reference point.
pub fn eval_shape(kind: ElementKind, p: [f64; 2]) -> ShapeEval {
    let [xi, eta] = p;
    match kind {
        ElementKind::Q1 => {
            let (vx, dx) = lin(xi);
            let (vy, dy) = lin(eta);
            // (a, b) index pairs in counterclockwise order.
            const IDX: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];
            let values = IDX.iter().map(|&(a, b)| vx[a] * vy[b]).collect();
            let gradients = IDX.iter().map(|&(a, b)| [dx[a] * vy[b], vx[a] * dy[b]]).collect();
            ShapeEval { values, gradients }
        }
        ElementKind::Q2 => {
            let (vx, dx) = quad(xi);
            let (vy, dy) = quad(eta);
            let mut values = Vec::with_capacity(9);
            let mut gradients = Vec::with_capacity(9);
            for b in 0..3 {
                for a in 0..3 {
                    values.push(vx[a] * vy[b]);
                    gradients.push([dx[a] * vy[b], vx[a] * dy[b]]);
                }
            }
            ShapeEval { values, gradients }
        }
    }
}

/// Shape data of one element kind tabulated at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct TabulatedShapes {
    pub kind: ElementKind,
    /// `values[q][i]`
    pub values: Vec<Vec<f64>>,
    /// reference gradients, `gradients[q][i]`
    pub gradients: Vec<Vec<[f64; 2]>>,
}

impl TabulatedShapes {
    pub fn new(kind: ElementKind, quad: &SpatialQuadrature) -> Self {
        let (values, gradients) = quad
            .points
            .iter()
            .map(|&p| {
                let s = eval_shape(kind, p);
                (s.values, s.gradients)
            })
            .unzip();
        Self {
            kind,
            values,
            gradients,
        }
    }
}

/// Q2 vector velocity plus Q1 scalar pressure on a structured mesh.
#[derive(Debug, Clone)]
pub struct TaylorHoodSpace {
    mesh: StructuredQuadMesh,
    q2_side: usize,
    q2_boundary: Vec<bool>,
    velocity_cell_dofs: Vec<[usize; 18]>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: StructuredQuadMesh) -> Self {
        let n = mesh.cells_per_side();
        let side = 2 * n + 1;
        let n_q2 = side * side;
        let q2_boundary = (0..n_q2)
            .map(|k| {
                let (i, j) = (k % side, k / side);
                i == 0 || j == 0 || i == side - 1 || j == side - 1
            })
            .collect();
        let mut velocity_cell_dofs = Vec::with_capacity(n * n);
        for cj in 0..n {
            for ci in 0..n {
                let mut dofs = [0usize; 18];
                for b in 0..3 {
                    for a in 0..3 {
                        let node = (2 * cj + b) * side + 2 * ci + a;
                        dofs[3 * b + a] = node;
                        dofs[9 + 3 * b + a] = n_q2 + node;
                    }
                }
                velocity_cell_dofs.push(dofs);
            }
        }
        Self {
            mesh,
            q2_side: side,
            q2_boundary,
            velocity_cell_dofs,
        }
    }

    pub fn mesh(&self) -> &StructuredQuadMesh {
        &self.mesh
    }

    pub fn num_q2_nodes(&self) -> usize {
        self.q2_side * self.q2_side
    }

    pub fn num_q1_nodes(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Number of velocity unknowns, boundary DOFs included.
    pub fn n_velocity(&self) -> usize {
        2 * self.num_q2_nodes()
    }

    pub fn n_pressure(&self) -> usize {
        self.num_q1_nodes()
    }

    /// Velocity DOFs of a cell: nine x-component DOFs followed by nine
    /// y-component DOFs, each block in local Q2 order.
    pub fn velocity_cell_dofs(&self, cell: usize) -> &[usize; 18] {
        &self.velocity_cell_dofs[cell]
    }

    pub fn pressure_cell_dofs(&self, cell: usize) -> &[usize; 4] {
        &self.mesh.cells()[cell]
    }

    pub fn q2_node_coords(&self, node: usize) -> [f64; 2] {
        let n2 = (self.q2_side - 1) as f64;
        let (i, j) = (node % self.q2_side, node / self.q2_side);
        let c = |k: usize| if k == self.q2_side - 1 { 1.0 } else { k as f64 / n2 };
        [c(i), c(j)]
    }

    /// True for velocity DOFs carrying the homogeneous Dirichlet condition.
    pub fn is_boundary_velocity_dof(&self, dof: usize) -> bool {
        self.q2_boundary[dof % self.num_q2_nodes()]
    }

    /// Dirichlet mask over all velocity DOFs.
    pub fn velocity_boundary_mask(&self) -> Vec<bool> {
        let mut mask = self.q2_boundary.clone();
        mask.extend_from_slice(&self.q2_boundary);
        mask
    }

    /// Samples a vector field at the Q2 nodes; boundary DOFs are set to zero.
    pub fn interpolate_velocity(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let n_q2 = self.num_q2_nodes();
        let mut out = vec![0.0; 2 * n_q2];
        for node in 0..n_q2 {
            if self.q2_boundary[node] {
                continue;
            }
            let v = f(self.q2_node_coords(node));
            out[node] = v[0];
            out[n_q2 + node] = v[1];
        }
        out
    }

    /// Samples a vector field at all Q2 nodes, boundary included.
    pub fn sample_velocity(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let n_q2 = self.num_q2_nodes();
        let mut out = vec![0.0; 2 * n_q2];
        for node in 0..n_q2 {
            let v = f(self.q2_node_coords(node));
            out[node] = v[0];
            out[n_q2 + node] = v[1];
        }
        out
    }

    /// Samples a scalar field at the Q1 nodes. No mean correction is applied.
    pub fn interpolate_pressure(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|&p| f(p)).collect()
    }

    fn inverse_jacobian(&self, cell: usize) -> [f64; 2] {
        let (_, size) = self.mesh.cell_box(cell);
        [1.0 / size[0], 1.0 / size[1]]
    }

    /// Value of the velocity field with coefficients `u` at a physical point.
    pub fn eval_velocity(&self, u: &[f64], p: [f64; 2]) -> Result<[f64; 2]> {
        self.check_len(u, self.n_velocity())?;
        let (cell, r) = self.mesh.locate(p)?;
        let s = eval_shape(ElementKind::Q2, r);
        let dofs = self.velocity_cell_dofs(cell);
        let mut v = [0.0; 2];
        for i in 0..9 {
            v[0] += u[dofs[i]] * s.values[i];
            v[1] += u[dofs[9 + i]] * s.values[i];
        }
        Ok(v)
    }

    /// Gradient `[[du1/dx, du1/dy], [du2/dx, du2/dy]]` of the velocity field.
    pub fn eval_velocity_gradient(&self, u: &[f64], p: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        self.check_len(u, self.n_velocity())?;
        let (cell, r) = self.mesh.locate(p)?;
        let jinv = self.inverse_jacobian(cell);
        let s = eval_shape(ElementKind::Q2, r);
        let dofs = self.velocity_cell_dofs(cell);
        let mut g = [[0.0; 2]; 2];
        for i in 0..9 {
            let dphi = [s.gradients[i][0] * jinv[0], s.gradients[i][1] * jinv[1]];
            for d in 0..2 {
                g[0][d] += u[dofs[i]] * dphi[d];
                g[1][d] += u[dofs[9 + i]] * dphi[d];
            }
        }
        Ok(g)
    }

    /// Value of the pressure field with coefficients `q` at a physical point.
    pub fn eval_pressure(&self, q: &[f64], p: [f64; 2]) -> Result<f64> {
        self.check_len(q, self.n_pressure())?;
        let (cell, r) = self.mesh.locate(p)?;
        let s = eval_shape(ElementKind::Q1, r);
        Ok(self
            .pressure_cell_dofs(cell)
            .iter()
            .zip(&s.values)
            .map(|(&d, &v)| q[d] * v)
            .sum())
    }

    fn check_len(&self, v: &[f64], expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(StokesError::LengthMismatch {
                expected,
                actual: v.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(n: usize) -> TaylorHoodSpace {
        TaylorHoodSpace::new(StructuredQuadMesh::unit_square(n).unwrap())
    }

    #[test]
    fn q1_center_and_off_center_values() {
        let s = eval_shape(ElementKind::Q1, [0.5, 0.5]);
        assert!(s.values.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        // (1-x)(1-y), x(1-y), xy, (1-x)y at (0.25, 0.5)
        let s = eval_shape(ElementKind::Q1, [0.25, 0.5]);
        let expect = [0.375, 0.125, 0.125, 0.375];
        for (v, e) in s.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn nodal_property() {
        for kind in [ElementKind::Q1, ElementKind::Q2] {
            for (k, node) in kind.nodes().into_iter().enumerate() {
                let s = eval_shape(kind, node);
                for (i, v) in s.values.iter().enumerate() {
                    let e = if i == k { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-15, "{kind:?} node {k} fn {i}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            for kind in [ElementKind::Q1, ElementKind::Q2] {
                let s = eval_shape(kind, [x, y]);
                let sum: f64 = s.values.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-13);
                let gx: f64 = s.gradients.iter().map(|g| g[0]).sum();
                let gy: f64 = s.gradients.iter().map(|g| g[1]).sum();
                prop_assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
            }
        }

        #[test]
        fn eval_at_nodes_returns_coefficients(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sp = space(3);
            let u: Vec<f64> = (0..sp.n_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q: Vec<f64> = (0..sp.n_pressure()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n_q2 = sp.num_q2_nodes();
            for node in (0..n_q2).step_by(5) {
                let v = sp.eval_velocity(&u, sp.q2_node_coords(node)).unwrap();
                prop_assert!((v[0] - u[node]).abs() < 1e-12);
                prop_assert!((v[1] - u[n_q2 + node]).abs() < 1e-12);
            }
            for (k, &p) in sp.mesh().vertices().iter().enumerate() {
                prop_assert!((sp.eval_pressure(&q, p).unwrap() - q[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn node_counts() {
        let sp = space(4);
        assert_eq!(sp.num_q2_nodes(), 81);
        assert_eq!(sp.num_q1_nodes(), 25);
        assert_eq!(sp.n_velocity(), 162);
        let boundary = (0..sp.n_velocity()).filter(|&d| sp.is_boundary_velocity_dof(d)).count();
        assert_eq!(boundary, 2 * 4 * 8);
    }

    #[test]
    fn interpolation_basics() {
        let sp = space(2);
        assert!(sp.interpolate_velocity(|_| [0.0, 0.0]).iter().all(|&c| c == 0.0));
        assert!(sp.interpolate_pressure(|_| 1.0).iter().all(|&c| c == 1.0));
        let u = sp.interpolate_velocity(|_| [1.0, 2.0]);
        for d in 0..sp.n_velocity() {
            if sp.is_boundary_velocity_dof(d) {
                assert_eq!(u[d], 0.0);
            }
        }
    }

    #[test]
    fn reproduces_bilinear_and_biquadratic_fields() {
        let sp = space(3);
        let bil = |p: [f64; 2]| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1];
        let q = sp.interpolate_pressure(bil);
        // Bubble-type biquadratic field vanishing on the boundary.
        let biq = |p: [f64; 2]| {
            let b = p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]);
            [b, -2.0 * b]
        };
        let u = sp.interpolate_velocity(biq);
        for &pt in &[[0.1, 0.7], [0.33, 0.5], [0.91, 0.02], [1.0, 1.0]] {
            assert!((sp.eval_pressure(&q, pt).unwrap() - bil(pt)).abs() < 1e-13);
            let v = sp.eval_velocity(&u, pt).unwrap();
            let e = biq(pt);
            assert!((v[0] - e[0]).abs() < 1e-14 && (v[1] - e[1]).abs() < 1e-14);
        }
        assert!(sp.eval_pressure(&q, [1.5, 0.0]).is_err());
    }
}
