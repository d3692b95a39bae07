#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use stokes_core::assembly::StokesOperators;

/// Reference values from the published tables, level 3.
pub mod reference {
    pub const INTERP_P_L2: f64 = 4.1881864102e-04;
    pub const COLLOC_P_L2: f64 = 4.5193083007e-04;
    pub const INTERP_U_H1_L2: f64 = 3.7608570388e-03;
    pub const COLLOC_U_H1_L2: f64 = 5.4564310437e-03;
    pub const INTERP_DTU_LBAR2: f64 = 1.7864127424e-04;
    pub const INTERP_DTU_L2PLUS: f64 = 2.0558599482e-02;
    pub const COLLOC_DTU_L2: f64 = 1.3176859187e-02;
}

/// Dense solve of
///
/// ```text
/// [ aM + bA   s B^T  0 ] [u]   [g]
/// [ s B       0      m ] [p] = [0]
/// [ 0         m^T    0 ] [l]   [0]
/// ```
///
/// with Dirichlet rows replaced by identity rows, built entry by entry from
/// the operators.
pub fn dense_saddle(ops: &StokesOperators, a: f64, b: f64, s: f64, g: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let nu = ops.n_velocity();
    let np = ops.n_pressure();
    let n = nu + np + 1;
    let mass = ops.mass.to_dense();
    let stiff = ops.stiffness.to_dense();
    let div = ops.divergence.to_dense();
    let bnd = &ops.boundary;
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..nu {
        if bnd[i] {
            k[(i, i)] = 1.0;
            continue;
        }
        rhs[i] = g[i];
        for j in 0..nu {
            if !bnd[j] {
                k[(i, j)] = a * mass[i][j] + b * stiff[i][j];
            }
        }
        for q in 0..np {
            k[(i, nu + q)] = s * div[q][i];
        }
    }
    for q in 0..np {
        for j in 0..nu {
            if !bnd[j] {
                k[(nu + q, j)] = s * div[q][j];
            }
        }
        k[(nu + q, nu + np)] = ops.mean[q];
        k[(nu + np, nu + q)] = ops.mean[q];
    }
    let x = k.lu().solve(&rhs).expect("dense system is singular");
    (
        x.rows(0, nu).iter().copied().collect(),
        x.rows(nu, np).iter().copied().collect(),
        x[nu + np],
    )
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Relative max-norm distance of the stacked `[u; p]` pairs.
pub fn rel_distance(u: &[f64], p: &[f64], u_ref: &[f64], p_ref: &[f64]) -> f64 {
    let scale = max_abs(u_ref).max(max_abs(p_ref)).max(f64::MIN_POSITIVE);
    max_diff(u, u_ref).max(max_diff(p, p_ref)) / scale
}

pub fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}
