//! Time marching for the piecewise linear in time Galerkin–Petrov scheme.
//!
//! On each interval `I_n = (t_{n-1}, t_n]` the discrete velocity is linear in
//! time and represented by its values at `t_{n-1}` and at the midpoint
//! `tbar_n`. The midpoint velocity and pressure solve
//!
//! ```text
//! (M + tau/2 A) ubar + tau/2 B^T pbar = M u_{n-1} + tau/2 Lbar_n
//!                             B ubar  = 0
//! ```
//!
//! and the nodal value follows by linear extrapolation, `u_n = 2 ubar - u_{n-1}`.
//! `Lbar_n` approximates the mean of the load vector `L(t) = (f(t), v)` over
//! `I_n`. With the trapezoidal (Gauss–Lobatto) rule it is
//! `(L(t_{n-1}) + L(t_n)) / 2`; see [`LoadOptions`] for the alternatives.
//! Intervals are numbered from 1 throughout this module, matching the node
//! numbering `t_0 = 0 < t_1 < ... < t_N = T`.

use crate::assembly::{assemble_gradient_load, assemble_load, assemble_operators, interpolated_load, StokesOperators};
use crate::error::{Result, StokesError};
use crate::fem_space::{gauss_rule_2d, SpatialQuadrature, TaylorHoodSpace};
use crate::linsolve::{Blend, SaddleSolver};
use crate::mesh::StructuredQuadMesh;
use crate::quadrature::GaussRule1d;

/// Points per axis of the cell quadrature used for the operators.
pub const ASSEMBLY_POINTS_PER_AXIS: usize = 3;

/// Points per axis of the cell quadrature used for load vectors.
pub const LOAD_POINTS_PER_AXIS: usize = 4;

/// Two-point Gauss–Lobatto (trapezoidal) rule on an interval of length `tau`.
pub fn quad_gauss_lobatto(g_left: f64, g_right: f64, tau: f64) -> f64 {
    0.5 * tau * (g_left + g_right)
}

/// One-point Gauss (midpoint) rule on an interval of length `tau`.
pub fn quad_gauss_midpoint(g_mid: f64, tau: f64) -> f64 {
    tau * g_mid
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    nodes: Vec<f64>,
}

impl TimeMesh {
    /// Mesh with nodes `t_0 = 0 < t_1 < ... < t_N`.
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(StokesError::InvalidTimeMesh("at least one interval is required".into()));
        }
        if nodes[0] != 0.0 {
            return Err(StokesError::InvalidTimeMesh("first node must be 0".into()));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) || nodes.iter().any(|t| !t.is_finite()) {
            return Err(StokesError::InvalidTimeMesh(
                "nodes must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { nodes })
    }

    /// `n` equal steps on `[0, end]`.
    pub fn uniform(end: f64, n: usize) -> Result<Self> {
        if n == 0 || !(end > 0.0) {
            return Err(StokesError::InvalidTimeMesh(format!(
                "cannot split [0, {end}] into {n} steps"
            )));
        }
        let tau = end / n as f64;
        let nodes = (0..=n).map(|k| if k == n { end } else { k as f64 * tau }).collect();
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals `N`.
    pub fn num_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn t(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Length of interval `n` (1-based).
    pub fn tau(&self, n: usize) -> f64 {
        self.nodes[n] - self.nodes[n - 1]
    }

    /// Midpoint of interval `n` (1-based).
    pub fn midpoint(&self, n: usize) -> f64 {
        0.5 * (self.nodes[n - 1] + self.nodes[n])
    }

    /// Interval containing `t` under the left-continuity convention: `t` in
    /// `(t_{n-1}, t_n]` maps to `n`, and `t = 0` maps to 1.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        let end = self.end();
        if !(0.0..=end).contains(&t) {
            return Err(StokesError::TimeOutOfRange { t, end });
        }
        // First node index k >= 1 with t <= t_k.
        let k = self.nodes[1..].partition_point(|&tk| tk < t) + 1;
        Ok(k.min(self.num_intervals()))
    }

    /// Interval whose closure starts at or before `t`, for right limits: `t`
    /// in `[t_{n-1}, t_n)` maps to `n`, and `t = T` maps to `N`.
    pub fn interval_right_of(&self, t: f64) -> Result<usize> {
        let end = self.end();
        if !(0.0..=end).contains(&t) {
            return Err(StokesError::TimeOutOfRange { t, end });
        }
        let k = self.nodes[1..].partition_point(|&tk| tk <= t) + 1;
        Ok(k.min(self.num_intervals()))
    }
}

/// Time rule for the load integral over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadTimeRule {
    /// Trapezoidal rule at both interval ends.
    GaussLobatto,
    /// `k`-point Gauss rule.
    Gauss(usize),
}

/// How the forcing enters a load vector at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadSpace {
    /// Cell quadrature of `(f, phi_i)`.
    Quadrature,
    /// Mass matrix applied to the nodal Q2 interpolant of `f`.
    Interpolated,
}

/// Load treatment of the time step and of the collocation conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoadOptions {
    /// Time rule of the step.
    pub time: LoadTimeRule,
    /// Spatial load of the step.
    pub space: LoadSpace,
    /// Spatial load in the collocation conditions.
    pub collocation: LoadSpace,
}

impl LoadOptions {
    /// Trapezoidal rule in time with quadrature in space: the scheme exactly
    /// as written, under which the collocation identities hold.
    pub const LOBATTO: LoadOptions = LoadOptions {
        time: LoadTimeRule::GaussLobatto,
        space: LoadSpace::Quadrature,
        collocation: LoadSpace::Quadrature,
    };

    /// Two-point Gauss rule in time with the interpolated forcing in the
    /// step; quadrature in the collocation conditions. The reference setting
    /// of the convergence study.
    pub const INTERPOLATED_GAUSS: LoadOptions = LoadOptions {
        time: LoadTimeRule::Gauss(2),
        space: LoadSpace::Interpolated,
        collocation: LoadSpace::Quadrature,
    };
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self::LOBATTO
    }
}

/// Space discretization: Taylor–Hood space, assembled operators, the cell
/// quadrature used for load vectors and the load treatment.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub space: TaylorHoodSpace,
    pub ops: StokesOperators,
    pub quad: SpatialQuadrature,
    pub load_options: LoadOptions,
}

impl Discretization {
    pub fn new(space: TaylorHoodSpace) -> Result<Self> {
        let ops = assemble_operators(&space, &gauss_rule_2d(ASSEMBLY_POINTS_PER_AXIS)?)?;
        Ok(Self {
            space,
            ops,
            quad: gauss_rule_2d(LOAD_POINTS_PER_AXIS)?,
            load_options: LoadOptions::default(),
        })
    }

    pub fn with_load_options(mut self, options: LoadOptions) -> Result<Self> {
        if let LoadTimeRule::Gauss(k) = options.time {
            GaussRule1d::new(k)?;
        }
        self.load_options = options;
        Ok(self)
    }

    /// Discretization on the `n x n` unit-square mesh.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(TaylorHoodSpace::new(StructuredQuadMesh::unit_square(n)?))
    }

    pub fn solver(&self, tolerance: f64) -> SaddleSolver<'_> {
        SaddleSolver::with_tolerance(&self.ops, tolerance)
    }

    /// Load vector of `f(., t)` as used by the step.
    pub fn load<F>(&self, f: &F, t: f64) -> Vec<f64>
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        self.load_as(self.load_options.space, f, t)
    }

    /// Load vector of `f(., t)` as used by the collocation conditions.
    pub fn collocation_load<F>(&self, f: &F, t: f64) -> Vec<f64>
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        self.load_as(self.load_options.collocation, f, t)
    }

    fn load_as<F>(&self, kind: LoadSpace, f: &F, t: f64) -> Vec<f64>
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        match kind {
            LoadSpace::Quadrature => assemble_load(&self.space, &self.quad, |x| f(x, t)),
            LoadSpace::Interpolated => interpolated_load(&self.space, &self.ops, |x| f(x, t)),
        }
    }

    /// Mean load over `(t0, t1]` under the configured time rule. `ends`
    /// supplies precomputed loads at both ends for the trapezoidal rule.
    fn mean_load<F>(&self, f: &F, t0: f64, t1: f64, ends: Option<(&[f64], &[f64])>) -> Result<Vec<f64>>
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        match self.load_options.time {
            LoadTimeRule::GaussLobatto => {
                let (a, b) = match ends {
                    Some((a, b)) => (a.to_vec(), b.to_vec()),
                    None => (self.load(f, t0), self.load(f, t1)),
                };
                Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
            }
            LoadTimeRule::Gauss(k) => {
                let rule = GaussRule1d::new(k)?;
                let mut mean = vec![0.0; self.space.n_velocity()];
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let l = self.load(f, t0 + s * (t1 - t0));
                    for (m, v) in mean.iter_mut().zip(&l) {
                        *m += w * v;
                    }
                }
                Ok(mean)
            }
        }
    }

    /// Mean load over `(t0, t1]`, see [`LoadOptions`].
    pub fn interval_load<F>(&self, f: &F, t0: f64, t1: f64) -> Result<Vec<f64>>
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        self.mean_load(f, t0, t1, None)
    }
}

/// Midpoint velocity and pressure of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

/// Solves the space problem on one interval from precomputed loads at both
/// interval ends (trapezoidal rule).
pub fn step_with_loads(
    solver: &SaddleSolver<'_>,
    u_prev: &[f64],
    load_prev: &[f64],
    load_next: &[f64],
    tau: f64,
) -> Result<StepResult> {
    let mean: Vec<f64> = load_prev.iter().zip(load_next).map(|(a, b)| 0.5 * (a + b)).collect();
    step_with_mean_load(solver, u_prev, &mean, tau)
}

/// Solves the space problem on one interval given the mean load `Lbar_n`.
pub fn step_with_mean_load(
    solver: &SaddleSolver<'_>,
    u_prev: &[f64],
    mean_load: &[f64],
    tau: f64,
) -> Result<StepResult> {
    let ops = solver.operators();
    let mut rhs = ops.mass.mul_vec(u_prev);
    for (r, l) in rhs.iter_mut().zip(mean_load) {
        *r += 0.5 * tau * l;
    }
    let half = 0.5 * tau;
    let sol = solver.solve(Blend::new(1.0, half).with_pressure_scale(half), &rhs)?;
    Ok(StepResult {
        velocity: sol.velocity,
        pressure: sol.pressure,
    })
}

/// Solves the space problem on the interval `(t_prev, t_prev + tau]`.
pub fn step<F>(
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    u_prev: &[f64],
    t_prev: f64,
    tau: f64,
    f: &F,
) -> Result<StepResult>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    if !(tau > 0.0) {
        return Err(StokesError::InvalidArgument(format!("step length {tau}")));
    }
    let mean = disc.interval_load(f, t_prev, t_prev + tau)?;
    step_with_mean_load(solver, u_prev, &mean, tau)
}

/// Discrete solution of the time-marching scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    time_mesh: TimeMesh,
    nodal: Vec<Vec<f64>>,
    mid_velocity: Vec<Vec<f64>>,
    mid_pressure: Vec<Vec<f64>>,
}

impl DiscreteTrajectory {
    pub fn time_mesh(&self) -> &TimeMesh {
        &self.time_mesh
    }

    pub fn num_intervals(&self) -> usize {
        self.time_mesh.num_intervals()
    }

    /// Nodal velocity `u^k = u(t_k)`, `k = 0..=N`.
    pub fn nodal_velocity(&self, k: usize) -> &[f64] {
        &self.nodal[k]
    }

    /// Midpoint velocity of interval `n` (1-based).
    pub fn midpoint_velocity(&self, n: usize) -> &[f64] {
        &self.mid_velocity[n - 1]
    }

    /// Midpoint pressure of interval `n` (1-based).
    pub fn midpoint_pressure(&self, n: usize) -> &[f64] {
        &self.mid_pressure[n - 1]
    }

    /// Constant time derivative of the velocity on interval `n`.
    pub fn slope(&self, n: usize) -> Vec<f64> {
        let s = 2.0 / self.time_mesh.tau(n);
        self.mid_velocity[n - 1]
            .iter()
            .zip(&self.nodal[n - 1])
            .map(|(ub, u0)| s * (ub - u0))
            .collect()
    }

    /// Velocity at time `t`, piecewise linear and continuous.
    pub fn eval_velocity(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.time_mesh.interval_of(t)?;
        let t0 = self.time_mesh.t(n - 1);
        let w = (t - t0) / (0.5 * self.time_mesh.tau(n));
        Ok(self.nodal[n - 1]
            .iter()
            .zip(&self.mid_velocity[n - 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }

    /// Time derivative at `t`, taken from the interval containing `t` under the
    /// left-continuity convention.
    pub fn eval_velocity_dt(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.slope(self.time_mesh.interval_of(t)?))
    }

    /// Right limit of the time derivative at `t`.
    pub fn eval_velocity_dt_right(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.slope(self.time_mesh.interval_right_of(t)?))
    }
}

/// Marches the scheme over `time_mesh` from the discretely divergence-free
/// initial velocity `u0h`.
pub fn march<F>(
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    u0h: &[f64],
    time_mesh: &TimeMesh,
    f: &F,
) -> Result<DiscreteTrajectory>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    let ops = &disc.ops;
    if u0h.len() != ops.n_velocity() {
        return Err(StokesError::LengthMismatch {
            expected: ops.n_velocity(),
            actual: u0h.len(),
        });
    }
    let div = max_abs(&ops.divergence_of(u0h));
    if div > 1e-8 * max_abs(u0h) {
        return Err(StokesError::InvalidArgument(format!(
            "initial velocity is not discretely divergence-free (|Bu| = {div:e})"
        )));
    }

    let n_steps = time_mesh.num_intervals();
    let mut nodal = Vec::with_capacity(n_steps + 1);
    let mut mid_velocity = Vec::with_capacity(n_steps);
    let mut mid_pressure = Vec::with_capacity(n_steps);
    nodal.push(u0h.to_vec());
    let lobatto = disc.load_options.time == LoadTimeRule::GaussLobatto;
    let mut load_prev = if lobatto {
        disc.load(f, time_mesh.t(0))
    } else {
        Vec::new()
    };
    for n in 1..=n_steps {
        let wrap = |e| StokesError::StepFailed {
            interval: n,
            source: Box::new(e),
        };
        let (t0, t1) = (time_mesh.t(n - 1), time_mesh.t(n));
        let mean = if lobatto {
            let load_next = disc.load(f, t1);
            let mean = disc.mean_load(f, t0, t1, Some((&load_prev, &load_next)));
            load_prev = load_next;
            mean
        } else {
            disc.interval_load(f, t0, t1)
        }
        .map_err(wrap)?;
        let u_prev = &nodal[n - 1];
        let res = step_with_mean_load(solver, u_prev, &mean, time_mesh.tau(n)).map_err(wrap)?;
        let u_next = res.velocity.iter().zip(u_prev).map(|(ub, u0)| 2.0 * ub - u0).collect();
        nodal.push(u_next);
        mid_velocity.push(res.velocity);
        mid_pressure.push(res.pressure);
    }

    Ok(DiscreteTrajectory {
        time_mesh: time_mesh.clone(),
        nodal,
        mid_velocity,
        mid_pressure,
    })
}

/// Discrete initial acceleration: the Stokes problem with right-hand side
/// `(grad g, grad v)` for `g = f_0 + lap u_0`, supplied through its gradient.
/// Returns the velocity part and the pressure-like multiplier.
pub fn initial_acceleration(
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    grad_g: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rhs = assemble_gradient_load(&disc.space, &disc.quad, grad_g);
    let sol = solver.solve(Blend::new(0.0, 1.0), &rhs)?;
    Ok((sol.velocity, sol.pressure))
}

/// Discrete initial velocity and pressure from the Stokes problem with
/// right-hand side `(f_0 - a_0h, v)`.
pub fn initial_stokes_data(
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    a0h: &[f64],
    f0: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let load = assemble_load(&disc.space, &disc.quad, f0);
    let ma = disc.ops.mass.mul_vec(a0h);
    let rhs: Vec<f64> = load.iter().zip(&ma).map(|(l, m)| l - m).collect();
    let sol = solver.solve(Blend::new(0.0, 1.0), &rhs)?;
    Ok((sol.velocity, sol.pressure))
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
