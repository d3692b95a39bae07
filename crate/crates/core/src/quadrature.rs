//! Gauss–Legendre rules on the unit interval and their tensor products on the
//! reference square.

use crate::error::{Result, StokesError};

/// Largest per-axis order accepted by [`gauss_rule_2d`].
pub const MAX_POINTS_PER_AXIS: usize = 6;

/// A one-dimensional quadrature rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule1d {
    /// `k`-point Gauss–Legendre rule mapped to `[0, 1]`. Nodes are the roots of
    /// the Legendre polynomial `P_k`, found by Newton iteration from the
    /// Chebyshev-like initial guesses.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(StokesError::UnsupportedQuadrature(k));
        }
        let mut points = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let kf = k as f64;
        for i in 0..k.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(k, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(k, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map from [-1, 1] to [0, 1], ascending order.
            points[i] = 0.5 * (1.0 - x);
            points[k - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[k - 1 - i] = 0.5 * w;
        }
        if k % 2 == 1 {
            points[k / 2] = 0.5;
        }
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `g` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(a + x * len))
            .sum::<f64>()
            * len
    }
}

/// Value and derivative of the Legendre polynomial `P_k` at `x`.
fn legendre(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product quadrature on the reference cell `[0, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialQuadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl SpatialQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `k x k` Gauss rule on the reference cell, exact for polynomials of degree
/// `2k - 1` in each variable.
pub fn gauss_rule_2d(k: usize) -> Result<SpatialQuadrature> {
    if !(1..=MAX_POINTS_PER_AXIS).contains(&k) {
        return Err(StokesError::UnsupportedQuadrature(k));
    }
    let line = GaussRule1d::new(k)?;
    let mut points = Vec::with_capacity(k * k);
    let mut weights = Vec::with_capacity(k * k);
    for (&y, &wy) in line.points.iter().zip(&line.weights) {
        for (&x, &wx) in line.points.iter().zip(&line.weights) {
            points.push([x, y]);
            weights.push(wx * wy);
        }
    }
    Ok(SpatialQuadrature { points, weights })
}
