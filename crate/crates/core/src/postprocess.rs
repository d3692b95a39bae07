//! Pressure post-processing of a discrete trajectory.
//!
//! * Collocation lifts the velocity on each interval by a quadratic bubble in
//!   time so that the strong semi-discrete equation holds at every time node.
//!   The accompanying pressure is piecewise linear. Under the trapezoidal load
//!   rule the lifted velocity is C¹ and the pressure continuous, so one
//!   mass-type saddle solve at `t_0` plus continuity recurrences suffice.
//!   Alternatively the collocation conditions are solved on every interval.
//! * Interpolation builds a piecewise linear pressure through the midpoint
//!   values `pbar^n`, extrapolating on the first interval.

use crate::error::{Result, StokesError};
use crate::linsolve::{Blend, SaddleSolver};
use crate::timestepping::{DiscreteTrajectory, Discretization, TimeMesh};

/// Default constants of the step-ratio condition checked for interpolation.
pub const DEFAULT_STEP_RATIO: f64 = 2.0;

/// Quadratic bubble `theta_n(t) = -(t - t_{n-1})(t - t_n) / tau_n`, normalized
/// so that its derivative at `t_{n-1}` equals one.
pub fn theta(t_prev: f64, t_next: f64, t: f64) -> f64 {
    -(t - t_prev) * (t - t_next) / (t_next - t_prev)
}

/// Derivative of [`theta`].
pub fn theta_dt(t_prev: f64, t_next: f64, t: f64) -> f64 {
    -(2.0 * t - t_prev - t_next) / (t_next - t_prev)
}

fn axpby(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect()
}

/// How the collocation data `(a^{n-1}, p~^{n-1})` of each interval is
/// obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CollocationMode {
    /// One mass-type solve at `t_0`, then the continuity recurrences.
    #[default]
    Recurrence,
    /// A mass-type solve of the collocation conditions at the left end of
    /// every interval.
    LocalSolve,
}

/// Collocation post-processing of a discrete trajectory.
///
/// Each interval `I_n` stores the data of its left end. Under the
/// trapezoidal load rule the end values of `I_n` coincide with the start
/// values of `I_{n+1}`, making `u~` C¹ and `p~` continuous; other load rules
/// leave jumps that [`CollocationTrajectory::continuity_defect`] reports.
#[derive(Debug, Clone)]
pub struct CollocationTrajectory<'a> {
    traj: &'a DiscreteTrajectory,
    /// `c_n`, the bubble coefficients per interval (index `n - 1`).
    lifting: Vec<Vec<f64>>,
    /// `a^{n-1} = d/dt u~(t_{n-1}+)` per interval.
    accel: Vec<Vec<f64>>,
    /// `p~^{n-1} = p~(t_{n-1}+)` per interval.
    pressure: Vec<Vec<f64>>,
}

/// Solves `(a + B^T p, v) = (f(t_k) - A u^k, v)` with `B a = 0`.
fn collocation_solve<F>(
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    traj: &DiscreteTrajectory,
    f: &F,
    k: usize,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    let load = disc.collocation_load(f, traj.time_mesh().t(k));
    let au = disc.ops.stiffness.mul_vec(traj.nodal_velocity(k));
    let rhs = axpby(1.0, &load, -1.0, &au);
    let sol = solver.solve(Blend::new(1.0, 0.0), &rhs)?;
    Ok((sol.velocity, sol.pressure))
}

/// Initial acceleration and pressure of the collocation trajectory: solves
/// `(a + B^T p, v) = (f(t_0) - A u^0, v)` with `B a = 0`.
pub fn collocation_init<F>(
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    traj: &DiscreteTrajectory,
    f: &F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    collocation_solve(disc, solver, traj, f, 0)
}

/// Full collocation post-processing: one saddle solve at `t_0` followed by
/// the solve-free recurrences on all intervals.
pub fn collocate<'a, F>(
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    traj: &'a DiscreteTrajectory,
    f: &F,
) -> Result<CollocationTrajectory<'a>>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    let (a0, p0) = collocation_init(disc, solver, traj, f)?;
    Ok(CollocationTrajectory::extend(traj, a0, p0))
}

/// Collocation post-processing in the given mode.
pub fn collocate_with<'a, F>(
    mode: CollocationMode,
    disc: &Discretization,
    solver: &SaddleSolver<'_>,
    traj: &'a DiscreteTrajectory,
    f: &F,
) -> Result<CollocationTrajectory<'a>>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    match mode {
        CollocationMode::Recurrence => collocate(disc, solver, traj, f),
        CollocationMode::LocalSolve => CollocationTrajectory::local(disc, solver, traj, f),
    }
}

impl<'a> CollocationTrajectory<'a> {
    /// Propagates the initial data `(a^0, p~^0)` through all intervals:
    /// `c_n = a^{n-1} - s_n`, `a^n = s_n - c_n` with `s_n` the velocity slope
    /// on `I_n`, and `p~^n = 2 pbar^n - p~^{n-1}`.
    pub fn extend(traj: &'a DiscreteTrajectory, a0: Vec<f64>, p0: Vec<f64>) -> Self {
        let n_steps = traj.num_intervals();
        let mut lifting = Vec::with_capacity(n_steps);
        let mut accel = Vec::with_capacity(n_steps);
        let mut pressure = Vec::with_capacity(n_steps);
        let (mut a, mut p) = (a0, p0);
        for n in 1..=n_steps {
            let slope = traj.slope(n);
            let c = axpby(1.0, &a, -1.0, &slope);
            let a_next = axpby(1.0, &slope, -1.0, &c);
            let p_next = axpby(2.0, traj.midpoint_pressure(n), -1.0, &p);
            lifting.push(c);
            accel.push(std::mem::replace(&mut a, a_next));
            pressure.push(std::mem::replace(&mut p, p_next));
        }
        Self {
            traj,
            lifting,
            accel,
            pressure,
        }
    }

    /// Solves the collocation conditions at `t_{n-1}` on every interval.
    pub fn local<F>(
        disc: &Discretization,
        solver: &SaddleSolver<'_>,
        traj: &'a DiscreteTrajectory,
        f: &F,
    ) -> Result<Self>
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        let n_steps = traj.num_intervals();
        let mut lifting = Vec::with_capacity(n_steps);
        let mut accel = Vec::with_capacity(n_steps);
        let mut pressure = Vec::with_capacity(n_steps);
        for n in 1..=n_steps {
            let (a, p) = collocation_solve(disc, solver, traj, f, n - 1).map_err(|e| StokesError::StepFailed {
                interval: n,
                source: Box::new(e),
            })?;
            lifting.push(axpby(1.0, &a, -1.0, &traj.slope(n)));
            accel.push(a);
            pressure.push(p);
        }
        Ok(Self {
            traj,
            lifting,
            accel,
            pressure,
        })
    }

    pub fn trajectory(&self) -> &'a DiscreteTrajectory {
        self.traj
    }

    fn mesh(&self) -> &TimeMesh {
        self.traj.time_mesh()
    }

    /// Bubble coefficient `c_n` of interval `n` (1-based).
    pub fn lifting(&self, n: usize) -> &[f64] {
        &self.lifting[n - 1]
    }

    /// `d/dt u~` at `t_k` from the interval starting there, or from the last
    /// interval when `k = N`.
    pub fn nodal_acceleration(&self, k: usize) -> Vec<f64> {
        if k < self.accel.len() {
            self.accel[k].clone()
        } else {
            self.acceleration_left(k)
        }
    }

    /// `p~` at `t_k` from the interval starting there, or from the last
    /// interval when `k = N`.
    pub fn nodal_pressure(&self, k: usize) -> Vec<f64> {
        if k < self.pressure.len() {
            self.pressure[k].clone()
        } else {
            self.pressure_left(k)
        }
    }

    /// `d/dt u~` at `t_k` from interval `I_k`, `k >= 1`.
    pub fn acceleration_left(&self, k: usize) -> Vec<f64> {
        axpby(1.0, &self.traj.slope(k), -1.0, &self.lifting[k - 1])
    }

    /// `p~` at `t_k` from interval `I_k`, `k >= 1`.
    pub fn pressure_left(&self, k: usize) -> Vec<f64> {
        axpby(2.0, self.traj.midpoint_pressure(k), -1.0, &self.pressure[k - 1])
    }

    /// Largest jump of `d/dt u~` and of `p~` at the interior nodes.
    pub fn continuity_defect(&self) -> (f64, f64) {
        let mut da = 0.0f64;
        let mut dp = 0.0f64;
        for k in 1..self.accel.len() {
            let a = self.acceleration_left(k);
            let p = self.pressure_left(k);
            da = da.max(a.iter().zip(&self.accel[k]).fold(0.0, |m, (x, y)| m.max((x - y).abs())));
            dp = dp.max(
                p.iter()
                    .zip(&self.pressure[k])
                    .fold(0.0, |m, (x, y)| m.max((x - y).abs())),
            );
        }
        (da, dp)
    }

    fn u_tilde_on(&self, n: usize, t: f64) -> Result<Vec<f64>> {
        let m = self.mesh();
        let th = theta(m.t(n - 1), m.t(n), t);
        let base = self.traj.eval_velocity(t)?;
        Ok(axpby(1.0, &base, th, &self.lifting[n - 1]))
    }

    fn dt_u_tilde_on(&self, n: usize, t: f64) -> Vec<f64> {
        let m = self.mesh();
        let th = theta_dt(m.t(n - 1), m.t(n), t);
        axpby(1.0, &self.traj.slope(n), th, &self.lifting[n - 1])
    }

    fn p_tilde_on(&self, n: usize, t: f64) -> Vec<f64> {
        let m = self.mesh();
        let w = (t - m.t(n - 1)) / (0.5 * m.tau(n));
        axpby(1.0 - w, &self.pressure[n - 1], w, self.traj.midpoint_pressure(n))
    }

    /// Lifted velocity at `t`.
    pub fn eval_u_tilde(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.mesh().interval_of(t)?;
        self.u_tilde_on(n, t)
    }

    /// Time derivative of the lifted velocity at `t` (left limit at nodes).
    pub fn eval_dt_u_tilde(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.mesh().interval_of(t)?;
        Ok(self.dt_u_tilde_on(n, t))
    }

    /// Right limit of the time derivative of the lifted velocity at `t`.
    pub fn eval_dt_u_tilde_right(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.mesh().interval_right_of(t)?;
        Ok(self.dt_u_tilde_on(n, t))
    }

    /// Post-processed pressure at `t` (left limit at nodes).
    pub fn eval_p_tilde(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.mesh().interval_of(t)?;
        Ok(self.p_tilde_on(n, t))
    }

    /// Right limit of the post-processed pressure at `t`.
    pub fn eval_p_tilde_right(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.mesh().interval_right_of(t)?;
        Ok(self.p_tilde_on(n, t))
    }

    fn residual(&self, disc: &Discretization, load: &[f64], k: usize, a: &[f64], p: &[f64]) -> f64 {
        let ops = &disc.ops;
        let ma = ops.mass.mul_vec(a);
        let au = ops.stiffness.mul_vec(self.traj.nodal_velocity(k));
        let bp = ops.divergence.mul_transpose_vec(p);
        (0..ops.n_velocity())
            .filter(|&d| !ops.boundary[d])
            .fold(0.0f64, |w, d| w.max((ma[d] + au[d] + bp[d] - load[d]).abs()))
    }

    /// Max-norm of `M a^k + A u^k + B^T p~^k - L(t_k)` over interior rows,
    /// using the nodal values of [`Self::nodal_acceleration`] and
    /// [`Self::nodal_pressure`].
    pub fn collocation_residual<F>(&self, disc: &Discretization, f: &F, k: usize) -> f64
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        let load = disc.collocation_load(f, self.mesh().t(k));
        self.residual(disc, &load, k, &self.nodal_acceleration(k), &self.nodal_pressure(k))
    }

    /// Same as [`Self::collocation_residual`] with the end values of `I_k`.
    pub fn collocation_residual_left<F>(&self, disc: &Discretization, f: &F, k: usize) -> f64
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
    {
        let load = disc.collocation_load(f, self.mesh().t(k));
        self.residual(disc, &load, k, &self.acceleration_left(k), &self.pressure_left(k))
    }
}

/// Linear interpolation (or extrapolation) through the samples `q_prev` at
/// `t_prev` and `q_next` at `t_next`, evaluated at `t`.
pub fn jn_eval(t_prev: f64, q_prev: &[f64], t_next: f64, q_next: &[f64], t: f64) -> Vec<f64> {
    let w = (t - t_prev) / (t_next - t_prev);
    q_prev.iter().zip(q_next).map(|(a, b)| a + w * (b - a)).collect()
}

/// Piecewise linear pressure through the midpoint pressures of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct InterpolationTrajectory<'a> {
    traj: &'a DiscreteTrajectory,
}

impl<'a> InterpolationTrajectory<'a> {
    /// Needs at least two intervals.
    pub fn new(traj: &'a DiscreteTrajectory) -> Result<Self> {
        if traj.num_intervals() < 2 {
            return Err(StokesError::InvalidArgument(
                "interpolation post-processing needs at least two time intervals".into(),
            ));
        }
        Ok(Self { traj })
    }

    pub fn trajectory(&self) -> &'a DiscreteTrajectory {
        self.traj
    }

    /// Interval whose midpoint pair defines the pressure on interval `m`.
    pub fn index_for_interval(m: usize) -> usize {
        m.max(2)
    }

    fn on(&self, m: usize, t: f64) -> Vec<f64> {
        let n = Self::index_for_interval(m);
        let tm = self.traj.time_mesh();
        jn_eval(
            tm.midpoint(n - 1),
            self.traj.midpoint_pressure(n - 1),
            tm.midpoint(n),
            self.traj.midpoint_pressure(n),
            t,
        )
    }

    /// Pressure at `t` (left limit at interior nodes).
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let m = self.traj.time_mesh().interval_of(t)?;
        Ok(self.on(m, t))
    }

    /// Right limit of the pressure at `t`.
    pub fn eval_right(&self, t: f64) -> Result<Vec<f64>> {
        let m = self.traj.time_mesh().interval_right_of(t)?;
        Ok(self.on(m, t))
    }
}

/// Checks `tau_1 <= c1 tau_2` and `tau_m <= c2 tau_{m-1}` for `m >= 2`.
/// Meshes with fewer than two intervals do not satisfy the condition.
pub fn check_timestep_condition(mesh: &TimeMesh, c1: f64, c2: f64) -> bool {
    let n = mesh.num_intervals();
    if n < 2 {
        return false;
    }
    mesh.tau(1) <= c1 * mesh.tau(2) && (2..=n).all(|m| mesh.tau(m) <= c2 * mesh.tau(m - 1))
}
