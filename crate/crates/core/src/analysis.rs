//! Manufactured solution, error norms and the convergence study.
//!
//! Errors are reported in three families of time norms:
//!
//! * `L2`: the Bochner norm `L^2(0, T; B)`, integrated with a Gauss rule on
//!   every interval;
//! * `LBar2`: `(sum_m tau_m |w(tbar_m)|_B^2)^(1/2)`, sampling interval midpoints;
//! * `L2Plus`: `(sum_m tau_m |w^+(t_{m-1})|_B^2)^(1/2)`, sampling right limits
//!   at the left end of each interval.
//!
//! Each family is evaluated for the velocity in H¹, its time derivative in L²
//! and the pressure in L².

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use crate::error::{Result, StokesError};
use crate::fem_space::{gauss_rule_2d, ElementKind, SpatialQuadrature, TabulatedShapes, TaylorHoodSpace};
use crate::linsolve::DEFAULT_TOLERANCE;
use crate::postprocess::{collocate_with, CollocationMode, CollocationTrajectory, InterpolationTrajectory};
use crate::quadrature::GaussRule1d;
use crate::timestepping::{march, DiscreteTrajectory, Discretization, LoadOptions, TimeMesh};

/// Velocity, pressure and forcing of the test problem on the unit square,
/// with final time `T = 2`:
///
/// ```text
/// u(x, t) = sin t * ( cos(pi y) sin(pi x)^2 sin(pi y),
///                    -cos(pi x) sin(pi y)^2 sin(pi x) )
/// p(x, t) = sin t * cos(pi y) sin(pi x) cos(pi x) sin(pi y)
/// f       = du/dt - lap u + grad p
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct ManufacturedSolution;

impl ManufacturedSolution {
    pub const FINAL_TIME: f64 = 2.0;

    /// Spatial velocity profile, `u = sin(t) * profile`.
    fn profile(x: [f64; 2]) -> [f64; 2] {
        let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        [0.5 * sx * sx * s2y, -0.5 * sy * sy * s2x]
    }

    fn profile_grad(x: [f64; 2]) -> [[f64; 2]; 2] {
        let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        [
            [0.5 * PI * s2x * s2y, PI * sx * sx * c2y],
            [-PI * sy * sy * c2x, -0.5 * PI * s2x * s2y],
        ]
    }

    fn profile_laplacian(x: [f64; 2]) -> [f64; 2] {
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        [PI * PI * s2y * (2.0 * c2x - 1.0), -PI * PI * s2x * (2.0 * c2y - 1.0)]
    }

    /// Pressure profile, `p = sin(t) * profile`.
    fn pressure_profile(x: [f64; 2]) -> f64 {
        0.25 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
    }

    fn pressure_profile_grad(x: [f64; 2]) -> [f64; 2] {
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        [0.5 * PI * c2x * s2y, 0.5 * PI * s2x * c2y]
    }

    fn pressure_profile_hessian(x: [f64; 2]) -> [[f64; 2]; 2] {
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        [
            [-PI * PI * s2x * s2y, PI * PI * c2x * c2y],
            [PI * PI * c2x * c2y, -PI * PI * s2x * s2y],
        ]
    }

    pub fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let p = Self::profile(x);
        [t.sin() * p[0], t.sin() * p[1]]
    }

    pub fn velocity_dt(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let p = Self::profile(x);
        [t.cos() * p[0], t.cos() * p[1]]
    }

    /// `grad[c][d] = d u_c / d x_d`
    pub fn velocity_grad(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        scale2(Self::profile_grad(x), t.sin())
    }

    pub fn velocity_dt_grad(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        scale2(Self::profile_grad(x), t.cos())
    }

    pub fn velocity_laplacian(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let l = Self::profile_laplacian(x);
        [t.sin() * l[0], t.sin() * l[1]]
    }

    pub fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        t.sin() * Self::pressure_profile(x)
    }

    pub fn pressure_grad(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = Self::pressure_profile_grad(x);
        [t.sin() * g[0], t.sin() * g[1]]
    }

    /// `f = du/dt - lap u + grad p`
    pub fn forcing(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let dt = self.velocity_dt(x, t);
        let lap = self.velocity_laplacian(x, t);
        let gp = self.pressure_grad(x, t);
        [dt[0] - lap[0] + gp[0], dt[1] - lap[1] + gp[1]]
    }

    /// `g = f(., t) + lap u(., t) = du/dt + grad p`, the data of the initial
    /// acceleration problem when taken at `t = 0`.
    pub fn acceleration_data(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let dt = self.velocity_dt(x, t);
        let gp = self.pressure_grad(x, t);
        [dt[0] + gp[0], dt[1] + gp[1]]
    }

    /// Gradient of [`Self::acceleration_data`].
    pub fn acceleration_data_grad(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let a = self.velocity_dt_grad(x, t);
        let h = scale2(Self::pressure_profile_hessian(x), t.sin());
        [
            [a[0][0] + h[0][0], a[0][1] + h[0][1]],
            [a[1][0] + h[1][0], a[1][1] + h[1][1]],
        ]
    }
}

fn scale2(m: [[f64; 2]; 2], s: f64) -> [[f64; 2]; 2] {
    [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]]
}

/// Spatial error norms of a velocity field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityError {
    pub l2: f64,
    pub h1_semi: f64,
}

impl VelocityError {
    pub fn h1_full(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

/// Cell quadrature with tabulated Q2/Q1 shapes for measuring errors against
/// smooth fields.
#[derive(Debug, Clone)]
pub struct ErrorQuadrature {
    quad: SpatialQuadrature,
    q2: TabulatedShapes,
    q1: TabulatedShapes,
}

impl ErrorQuadrature {
    /// `k x k` Gauss points per cell.
    pub fn new(k: usize) -> Result<Self> {
        let quad = gauss_rule_2d(k)?;
        Ok(Self {
            q2: TabulatedShapes::new(ElementKind::Q2, &quad),
            q1: TabulatedShapes::new(ElementKind::Q1, &quad),
            quad,
        })
    }

    /// L² and H¹-seminorm of `u_exact - u_h`. `exact` returns the value and the
    /// gradient of the reference field.
    pub fn velocity_error(
        &self,
        space: &TaylorHoodSpace,
        coeffs: &[f64],
        exact: impl Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2]),
    ) -> VelocityError {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for cell in 0..space.mesh().num_cells() {
            let (lo, size) = space.mesh().cell_box(cell);
            let det = size[0] * size[1];
            let dofs = space.velocity_cell_dofs(cell);
            for (q, (&p, &w)) in self.quad.points.iter().zip(&self.quad.weights).enumerate() {
                let x = [lo[0] + p[0] * size[0], lo[1] + p[1] * size[1]];
                let mut v = [0.0; 2];
                let mut g = [[0.0; 2]; 2];
                for i in 0..9 {
                    let phi = self.q2.values[q][i];
                    let r = self.q2.gradients[q][i];
                    let d = [r[0] / size[0], r[1] / size[1]];
                    for c in 0..2 {
                        let coef = coeffs[dofs[9 * c + i]];
                        v[c] += coef * phi;
                        g[c][0] += coef * d[0];
                        g[c][1] += coef * d[1];
                    }
                }
                let (ve, ge) = exact(x);
                let w = w * det;
                l2 += w * ((ve[0] - v[0]).powi(2) + (ve[1] - v[1]).powi(2));
                h1 += w
                    * ((ge[0][0] - g[0][0]).powi(2)
                        + (ge[0][1] - g[0][1]).powi(2)
                        + (ge[1][0] - g[1][0]).powi(2)
                        + (ge[1][1] - g[1][1]).powi(2));
            }
        }
        VelocityError {
            l2: l2.sqrt(),
            h1_semi: h1.sqrt(),
        }
    }

    /// L² norm of `u_exact - u_h` without gradients.
    pub fn velocity_l2(&self, space: &TaylorHoodSpace, coeffs: &[f64], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
        let mut l2 = 0.0;
        for cell in 0..space.mesh().num_cells() {
            let (lo, size) = space.mesh().cell_box(cell);
            let det = size[0] * size[1];
            let dofs = space.velocity_cell_dofs(cell);
            for (q, (&p, &w)) in self.quad.points.iter().zip(&self.quad.weights).enumerate() {
                let x = [lo[0] + p[0] * size[0], lo[1] + p[1] * size[1]];
                let mut v = [0.0; 2];
                for i in 0..9 {
                    let phi = self.q2.values[q][i];
                    v[0] += coeffs[dofs[i]] * phi;
                    v[1] += coeffs[dofs[9 + i]] * phi;
                }
                let ve = exact(x);
                l2 += w * det * ((ve[0] - v[0]).powi(2) + (ve[1] - v[1]).powi(2));
            }
        }
        l2.sqrt()
    }

    /// L² norm of `p_exact - p_h`. No mean correction is applied.
    pub fn pressure_l2(&self, space: &TaylorHoodSpace, coeffs: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
        let mut l2 = 0.0;
        for cell in 0..space.mesh().num_cells() {
            let (lo, size) = space.mesh().cell_box(cell);
            let det = size[0] * size[1];
            let dofs = space.pressure_cell_dofs(cell);
            for (q, (&p, &w)) in self.quad.points.iter().zip(&self.quad.weights).enumerate() {
                let x = [lo[0] + p[0] * size[0], lo[1] + p[1] * size[1]];
                let ph: f64 = (0..4).map(|a| coeffs[dofs[a]] * self.q1.values[q][a]).sum();
                l2 += w * det * (exact(x) - ph).powi(2);
            }
        }
        l2.sqrt()
    }
}

/// `L^2(0, T)` norm of a scalar error function with a `k`-point Gauss rule per
/// interval (`k >= 5`).
pub fn time_l2_norm(mut error_at: impl FnMut(f64) -> f64, mesh: &TimeMesh, points_per_interval: usize) -> Result<f64> {
    if points_per_interval < 5 {
        return Err(StokesError::InvalidArgument(format!(
            "time quadrature needs at least 5 points, got {points_per_interval}"
        )));
    }
    let rule = GaussRule1d::new(points_per_interval)?;
    let mut sum = 0.0;
    for n in 1..=mesh.num_intervals() {
        sum += rule.integrate(mesh.t(n - 1), mesh.t(n), |t| error_at(t).powi(2));
    }
    Ok(sum.sqrt())
}

fn weighted_samples(samples: &[f64], mesh: &TimeMesh) -> Result<f64> {
    if samples.len() != mesh.num_intervals() {
        return Err(StokesError::LengthMismatch {
            expected: mesh.num_intervals(),
            actual: samples.len(),
        });
    }
    Ok(samples
        .iter()
        .enumerate()
        .map(|(m, s)| mesh.tau(m + 1) * s * s)
        .sum::<f64>()
        .sqrt())
}

/// Midpoint-sampled norm from the spatial norms `|w(tbar_m)|`, one per
/// interval.
pub fn lbar2_norm(midpoint_norms: &[f64], mesh: &TimeMesh) -> Result<f64> {
    weighted_samples(midpoint_norms, mesh)
}

/// Right-limit-sampled norm from the spatial norms `|w^+(t_{m-1})|`, one per
/// interval.
pub fn l2plus_norm(right_limit_norms: &[f64], mesh: &TimeMesh) -> Result<f64> {
    weighted_samples(right_limit_norms, mesh)
}

/// Experimental order of convergence between two successive levels.
pub fn eoc(e_coarse: f64, e_fine: f64) -> Result<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(StokesError::InvalidArgument(format!(
            "EOC needs positive errors, got {e_coarse} and {e_fine}"
        )));
    }
    Ok((e_coarse / e_fine).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Collocation,
    Interpolation,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Collocation => "collocation",
            Variant::Interpolation => "interpolation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormFamily {
    L2,
    LBar2,
    L2Plus,
}

impl NormFamily {
    pub const ALL: [NormFamily; 3] = [NormFamily::L2, NormFamily::LBar2, NormFamily::L2Plus];

    pub fn name(self) -> &'static str {
        match self {
            NormFamily::L2 => "L2",
            NormFamily::LBar2 => "lbar2",
            NormFamily::L2Plus => "l2plus",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// Velocity error in the full H¹ norm.
    VelocityH1,
    /// Time derivative of the velocity in L².
    VelocityDtL2,
    /// Pressure in L².
    PressureL2,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::VelocityH1, Quantity::VelocityDtL2, Quantity::PressureL2];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Errors of one variant at one level, `values[family][quantity]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorTable {
    pub values: [[f64; 3]; 3],
}

impl ErrorTable {
    pub fn get(&self, family: NormFamily, q: Quantity) -> f64 {
        self.values[family.index()][q.index()]
    }

    fn set(&mut self, family: NormFamily, q: Quantity, v: f64) {
        self.values[family.index()][q.index()] = v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub tau: f64,
    pub h: f64,
    pub errors: ErrorTable,
}

/// Per-level errors of one post-processing variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub variant: Variant,
    pub records: Vec<LevelRecord>,
}

impl ConvergenceReport {
    /// EOC of record `i` against record `i - 1`; `None` for the first record
    /// or when an error is not positive.
    pub fn eoc(&self, i: usize, family: NormFamily, q: Quantity) -> Option<f64> {
        if i == 0 {
            return None;
        }
        eoc(
            self.records[i - 1].errors.get(family, q),
            self.records[i].errors.get(family, q),
        )
        .ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub levels: RangeInclusive<usize>,
    pub tolerance: f64,
    /// Gauss points per interval for the `L2` family.
    pub time_points: usize,
    /// Gauss points per cell axis for spatial norms.
    pub error_points: usize,
    /// Cells per side on level 0.
    pub base_cells: usize,
    /// Time steps on level 0.
    pub base_steps: usize,
    pub load: LoadOptions,
    pub collocation: CollocationMode,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            levels: 0..=3,
            tolerance: DEFAULT_TOLERANCE,
            time_points: 5,
            error_points: 5,
            base_cells: 4,
            base_steps: 2,
            load: LoadOptions::INTERPOLATED_GAUSS,
            collocation: CollocationMode::LocalSolve,
        }
    }
}

impl StudyConfig {
    pub fn cells(&self, level: usize) -> usize {
        self.base_cells << level
    }

    pub fn steps(&self, level: usize) -> usize {
        self.base_steps << level
    }
}

/// Errors of both variants at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelErrors {
    pub level: usize,
    pub tau: f64,
    pub h: f64,
    pub interpolation: ErrorTable,
    pub collocation: ErrorTable,
}

/// Both variants over a range of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub interpolation: ConvergenceReport,
    pub collocation: ConvergenceReport,
}

impl StudyResult {
    pub fn report(&self, variant: Variant) -> &ConvergenceReport {
        match variant {
            Variant::Collocation => &self.collocation,
            Variant::Interpolation => &self.interpolation,
        }
    }
}

/// Measures errors of a computed trajectory and its two post-processings
/// against the manufactured solution.
pub struct ErrorMeasurement<'a> {
    pub disc: &'a Discretization,
    pub exact: ManufacturedSolution,
    pub quad: ErrorQuadrature,
    pub time_points: usize,
}

impl<'a> ErrorMeasurement<'a> {
    pub fn new(disc: &'a Discretization, error_points: usize, time_points: usize) -> Result<Self> {
        Ok(Self {
            disc,
            exact: ManufacturedSolution,
            quad: ErrorQuadrature::new(error_points)?,
            time_points,
        })
    }

    /// Full H¹ error of a velocity coefficient vector at time `t`.
    pub fn velocity_h1(&self, u: &[f64], t: f64) -> f64 {
        let ex = self.exact;
        self.quad
            .velocity_error(&self.disc.space, u, |x| (ex.velocity(x, t), ex.velocity_grad(x, t)))
            .h1_full()
    }

    pub fn velocity_dt_l2(&self, dtu: &[f64], t: f64) -> f64 {
        let ex = self.exact;
        self.quad.velocity_l2(&self.disc.space, dtu, |x| ex.velocity_dt(x, t))
    }

    pub fn pressure_l2(&self, p: &[f64], t: f64) -> f64 {
        let ex = self.exact;
        self.quad.pressure_l2(&self.disc.space, p, |x| ex.pressure(x, t))
    }

    /// Error table for the raw velocity with the interpolated pressure.
    pub fn interpolation_errors(&self, it: &InterpolationTrajectory<'_>) -> Result<ErrorTable> {
        let traj = it.trajectory();
        let tm = traj.time_mesh();
        let k = self.time_points;
        let mut table = ErrorTable::default();

        let u = time_l2_norm(|t| self.velocity_h1(&traj.eval_velocity(t).unwrap(), t), tm, k)?;
        let du = time_l2_norm(|t| self.velocity_dt_l2(&traj.eval_velocity_dt(t).unwrap(), t), tm, k)?;
        let p = time_l2_norm(|t| self.pressure_l2(&it.eval(t).unwrap(), t), tm, k)?;
        table.set(NormFamily::L2, Quantity::VelocityH1, u);
        table.set(NormFamily::L2, Quantity::VelocityDtL2, du);
        table.set(NormFamily::L2, Quantity::PressureL2, p);

        let mids: Vec<f64> = (1..=tm.num_intervals()).map(|m| tm.midpoint(m)).collect();
        let u: Vec<f64> = (1..=tm.num_intervals())
            .map(|m| self.velocity_h1(traj.midpoint_velocity(m), mids[m - 1]))
            .collect();
        let du: Vec<f64> = (1..=tm.num_intervals())
            .map(|m| self.velocity_dt_l2(&traj.slope(m), mids[m - 1]))
            .collect();
        let p: Vec<f64> = (1..=tm.num_intervals())
            .map(|m| self.pressure_l2(&it.eval(mids[m - 1]).unwrap(), mids[m - 1]))
            .collect();
        table.set(NormFamily::LBar2, Quantity::VelocityH1, lbar2_norm(&u, tm)?);
        table.set(NormFamily::LBar2, Quantity::VelocityDtL2, lbar2_norm(&du, tm)?);
        table.set(NormFamily::LBar2, Quantity::PressureL2, lbar2_norm(&p, tm)?);

        let u: Vec<f64> = (1..=tm.num_intervals())
            .map(|m| self.velocity_h1(traj.nodal_velocity(m - 1), tm.t(m - 1)))
            .collect();
        let du: Vec<f64> = (1..=tm.num_intervals())
            .map(|m| self.velocity_dt_l2(&traj.slope(m), tm.t(m - 1)))
            .collect();
        let p: Vec<f64> = (1..=tm.num_intervals())
            .map(|m| self.pressure_l2(&it.eval_right(tm.t(m - 1)).unwrap(), tm.t(m - 1)))
            .collect();
        table.set(NormFamily::L2Plus, Quantity::VelocityH1, l2plus_norm(&u, tm)?);
        table.set(NormFamily::L2Plus, Quantity::VelocityDtL2, l2plus_norm(&du, tm)?);
        table.set(NormFamily::L2Plus, Quantity::PressureL2, l2plus_norm(&p, tm)?);
        Ok(table)
    }

    /// Error table for the lifted velocity and the collocation pressure.
    pub fn collocation_errors(&self, ct: &CollocationTrajectory<'_>) -> Result<ErrorTable> {
        let tm = ct.trajectory().time_mesh();
        let k = self.time_points;
        let mut table = ErrorTable::default();

        let u = time_l2_norm(|t| self.velocity_h1(&ct.eval_u_tilde(t).unwrap(), t), tm, k)?;
        let du = time_l2_norm(|t| self.velocity_dt_l2(&ct.eval_dt_u_tilde(t).unwrap(), t), tm, k)?;
        let p = time_l2_norm(|t| self.pressure_l2(&ct.eval_p_tilde(t).unwrap(), t), tm, k)?;
        table.set(NormFamily::L2, Quantity::VelocityH1, u);
        table.set(NormFamily::L2, Quantity::VelocityDtL2, du);
        table.set(NormFamily::L2, Quantity::PressureL2, p);

        let n = tm.num_intervals();
        let sample = |at: &dyn Fn(usize) -> f64, right: bool| -> Result<[f64; 3]> {
            let mut u = Vec::with_capacity(n);
            let mut du = Vec::with_capacity(n);
            let mut p = Vec::with_capacity(n);
            for m in 1..=n {
                let t = at(m);
                let (uv, dv, pv) = if right {
                    let uv = ct.eval_u_tilde(t)?;
                    (uv, ct.eval_dt_u_tilde_right(t)?, ct.eval_p_tilde_right(t)?)
                } else {
                    (ct.eval_u_tilde(t)?, ct.eval_dt_u_tilde(t)?, ct.eval_p_tilde(t)?)
                };
                u.push(self.velocity_h1(&uv, t));
                du.push(self.velocity_dt_l2(&dv, t));
                p.push(self.pressure_l2(&pv, t));
            }
            Ok([
                weighted_samples(&u, tm)?,
                weighted_samples(&du, tm)?,
                weighted_samples(&p, tm)?,
            ])
        };
        let mid = sample(&|m| tm.midpoint(m), false)?;
        let left = sample(&|m| tm.t(m - 1), true)?;
        for q in Quantity::ALL {
            table.set(NormFamily::LBar2, q, mid[q.index()]);
            table.set(NormFamily::L2Plus, q, left[q.index()]);
        }
        Ok(table)
    }
}

/// Simulates one refinement level with forcing `f` and measures both
/// variants against the manufactured solution. The discrete initial velocity
/// is zero.
pub fn run_level<F>(level: usize, cfg: &StudyConfig, f: &F) -> Result<LevelErrors>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    let wrap = |e: StokesError| StokesError::LevelFailed {
        level,
        source: Box::new(e),
    };
    let disc = Discretization::unit_square(cfg.cells(level))
        .and_then(|d| d.with_load_options(cfg.load))
        .map_err(wrap)?;
    let solver = disc.solver(cfg.tolerance);
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, cfg.steps(level)).map_err(wrap)?;
    let u0 = vec![0.0; disc.space.n_velocity()];
    let traj = march(&disc, &solver, &u0, &tm, f).map_err(wrap)?;
    let ct = collocate_with(cfg.collocation, &disc, &solver, &traj, f).map_err(wrap)?;
    let it = InterpolationTrajectory::new(&traj).map_err(wrap)?;
    let meas = ErrorMeasurement::new(&disc, cfg.error_points, cfg.time_points).map_err(wrap)?;
    Ok(LevelErrors {
        level,
        tau: tm.tau(1),
        h: disc.space.mesh().h(),
        interpolation: meas.interpolation_errors(&it).map_err(wrap)?,
        collocation: meas.collocation_errors(&ct).map_err(wrap)?,
    })
}

/// Runs the convergence study over `cfg.levels` with forcing `f`.
pub fn run_convergence_study_with_forcing<F>(cfg: &StudyConfig, f: &F) -> Result<StudyResult>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + ?Sized,
{
    let mut interpolation = ConvergenceReport {
        variant: Variant::Interpolation,
        records: Vec::new(),
    };
    let mut collocation = ConvergenceReport {
        variant: Variant::Collocation,
        records: Vec::new(),
    };
    for level in cfg.levels.clone() {
        let le = run_level(level, cfg, f)?;
        interpolation.records.push(LevelRecord {
            level,
            tau: le.tau,
            h: le.h,
            errors: le.interpolation,
        });
        collocation.records.push(LevelRecord {
            level,
            tau: le.tau,
            h: le.h,
            errors: le.collocation,
        });
    }
    Ok(StudyResult {
        interpolation,
        collocation,
    })
}

/// Runs the convergence study for the manufactured solution.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let ex = ManufacturedSolution;
    run_convergence_study_with_forcing(cfg, &|x, t| ex.forcing(x, t))
}

/// Raw-trajectory helper used by tests and examples: midpoint pressure error
/// samples `|p(tbar_m) - pbar^m|`.
pub fn midpoint_pressure_errors(meas: &ErrorMeasurement<'_>, traj: &DiscreteTrajectory) -> Vec<f64> {
    let tm = traj.time_mesh();
    (1..=tm.num_intervals())
        .map(|m| meas.pressure_l2(traj.midpoint_pressure(m), tm.midpoint(m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn forcing_matches_finite_differences() {
        let ex = ManufacturedSolution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let h = 1e-4;
        for _ in 0..20 {
            let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let t = rng.gen_range(0.05..1.95);
            let dt = |c: usize| (ex.velocity(x, t + h)[c] - ex.velocity(x, t - h)[c]) / (2.0 * h);
            let lap = |c: usize| {
                let u = |dx: f64, dy: f64| ex.velocity([x[0] + dx, x[1] + dy], t)[c];
                (u(h, 0.0) + u(-h, 0.0) + u(0.0, h) + u(0.0, -h) - 4.0 * u(0.0, 0.0)) / (h * h)
            };
            let gp = [
                (ex.pressure([x[0] + h, x[1]], t) - ex.pressure([x[0] - h, x[1]], t)) / (2.0 * h),
                (ex.pressure([x[0], x[1] + h], t) - ex.pressure([x[0], x[1] - h], t)) / (2.0 * h),
            ];
            let f = ex.forcing(x, t);
            for c in 0..2 {
                let fd = dt(c) - lap(c) + gp[c];
                assert!((f[c] - fd).abs() <= 1e-6, "{} vs {}", f[c], fd);
            }
        }
    }

    #[test]
    fn forcing_special_values() {
        let ex = ManufacturedSolution;
        let f = ex.forcing([0.5, 0.5], 0.0);
        assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-15);
        for x in [[0.1, 0.3], [0.7, 0.2]] {
            let f = ex.forcing(x, 0.0);
            let d = ex.velocity_dt(x, 0.0);
            assert!((f[0] - d[0]).abs() < 1e-14 && (f[1] - d[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_solution_properties() {
        let ex = ManufacturedSolution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let t = rng.gen_range(0.0..2.0);
            let g = ex.velocity_grad(x, t);
            assert!((g[0][0] + g[1][1]).abs() <= 1e-12);
            assert_eq!(ex.velocity(x, 0.0), [0.0, 0.0]);
            assert_eq!(ex.pressure(x, 0.0), 0.0);
            let s = rng.gen_range(0.0..1.0);
            for b in [[0.0, s], [1.0, s], [s, 0.0], [s, 1.0]] {
                let u = ex.velocity(b, t);
                assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
            }
        }
        // Zero pressure mean via a fine tensor rule.
        let r = GaussRule1d::new(20).unwrap();
        let mean = r.integrate(0.0, 1.0, |x| r.integrate(0.0, 1.0, |y| ex.pressure([x, y], 0.7)));
        assert!(mean.abs() < 1e-14);
        // Gradients against central differences.
        let (x, t, h) = ([0.31, 0.77], 1.3, 1e-6);
        let g = ex.velocity_grad(x, t);
        for c in 0..2 {
            let dx = (ex.velocity([x[0] + h, x[1]], t)[c] - ex.velocity([x[0] - h, x[1]], t)[c]) / (2.0 * h);
            let dy = (ex.velocity([x[0], x[1] + h], t)[c] - ex.velocity([x[0], x[1] - h], t)[c]) / (2.0 * h);
            assert!((g[c][0] - dx).abs() < 1e-7 && (g[c][1] - dy).abs() < 1e-7);
        }
        let ag = ex.acceleration_data_grad(x, t);
        for c in 0..2 {
            let dx = (ex.acceleration_data([x[0] + h, x[1]], t)[c] - ex.acceleration_data([x[0] - h, x[1]], t)[c])
                / (2.0 * h);
            let dy = (ex.acceleration_data([x[0], x[1] + h], t)[c] - ex.acceleration_data([x[0], x[1] - h], t)[c])
                / (2.0 * h);
            assert!((ag[c][0] - dx).abs() < 1e-6 && (ag[c][1] - dy).abs() < 1e-6);
        }
    }

    #[test]
    fn time_norms() {
        let tm = TimeMesh::uniform(2.0, 4).unwrap();
        assert_eq!(time_l2_norm(|_| 0.0, &tm, 5).unwrap(), 0.0);
        assert!((time_l2_norm(|_| 1.0, &tm, 5).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let unit = TimeMesh::uniform(1.0, 1).unwrap();
        assert!((time_l2_norm(|t| t, &unit, 5).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!(time_l2_norm(|t| t, &unit, 4).is_err());

        assert_eq!(lbar2_norm(&[0.0; 4], &tm).unwrap(), 0.0);
        assert!((lbar2_norm(&[1.0; 4], &tm).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let base = [0.3, 1.2, 0.7, 2.0];
        let scaled: Vec<f64> = base.iter().map(|v| -3.0 * v).collect();
        let a = l2plus_norm(&base, &tm).unwrap();
        assert!((l2plus_norm(&scaled, &tm).unwrap() - 3.0 * a).abs() < 1e-14);
        assert!(lbar2_norm(&[1.0; 3], &tm).is_err());
    }

    #[test]
    fn eoc_values() {
        assert!((eoc(4e-2, 1e-2).unwrap() - 2.0).abs() < 1e-15);
        let paper = eoc(1.5106628370e+00, 2.3275917549e-01).unwrap();
        assert_eq!(format!("{paper:.2}"), "2.70");
        assert_eq!(eoc(0.3, 0.3).unwrap(), 0.0);
        assert!(eoc(0.0, 1.0).is_err());
        assert!(eoc(1.0, -1.0).is_err());
    }

    #[test]
    fn spatial_norms_of_polynomials() {
        let sp = TaylorHoodSpace::new(crate::mesh::StructuredQuadMesh::unit_square(3).unwrap());
        let eq = ErrorQuadrature::new(5).unwrap();
        let zero = vec![0.0; sp.n_velocity()];
        let e = eq.velocity_error(&sp, &zero, |_| ([0.0; 2], [[0.0; 2]; 2]));
        assert_eq!(e, VelocityError::default());
        // g = (b, 0) with b = x(1-x)y(1-y): |g|^2 = 1/900, |grad g|^2 = 1/45.
        let b = |x: [f64; 2]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        let u = sp.interpolate_velocity(|x| [b(x), 0.0]);
        let e = eq.velocity_error(&sp, &u, |_| ([0.0; 2], [[0.0; 2]; 2]));
        assert!((e.l2 - (1.0f64 / 900.0).sqrt()).abs() < 1e-12);
        assert!((e.h1_semi - (1.0f64 / 45.0).sqrt()).abs() < 1e-12);
        let q = sp.interpolate_pressure(|x| x[0] - 0.5);
        let pe = eq.pressure_l2(&sp, &q, |_| 0.0);
        assert!((pe - (1.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
