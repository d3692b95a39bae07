//! Cross-module invariant suite behind the `verify` subcommand.
//!
//! Each check yields one [`Check`]; the suite never stops at the first
//! failure. Random inputs come from a seeded ChaCha generator, so a given seed
//! always exercises the same points.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::ManufacturedSolution;
use crate::assembly::{assemble_gradient_load, assemble_load, assemble_operators, StokesOperators};
use crate::error::Result;
use crate::linsolve::{Blend, SaddleSolver, DEFAULT_TOLERANCE};
use crate::postprocess::{collocate, collocation_init, CollocationTrajectory, InterpolationTrajectory};
use crate::quadrature::{gauss_rule_2d, GaussRule1d, MAX_POINTS_PER_AXIS};
use crate::timestepping::{
    initial_acceleration, initial_stokes_data, march, quad_gauss_lobatto, quad_gauss_midpoint, step_with_mean_load,
    Discretization, LoadOptions, TimeMesh, ASSEMBLY_POINTS_PER_AXIS,
};

/// Deliberate defects for exercising the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Negates the x-velocity columns of `B` in the operators the solver
    /// sees. The divergence check measures with a clean `B` and must fail.
    FlipDivergenceSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn record(&mut self, name: &'static str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { name, passed, detail });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Oracle and invariant tolerances.
pub const ORACLE_TOLERANCE: f64 = 1e-10;
pub const DIVERGENCE_TOLERANCE: f64 = 1e-9;
pub const CONTINUITY_TOLERANCE: f64 = 1e-10;
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
pub const FORCING_FD_TOLERANCE: f64 = 1e-6;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Dense LU solve of the explicitly formed augmented system. Returns the
/// stacked `[u; p; lambda]`.
pub fn dense_saddle_solve(solver: &SaddleSolver<'_>, blend: Blend, g: &[f64]) -> Option<Vec<f64>> {
    let a = solver.augmented_matrix(blend).to_dense();
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let b = DVector::from_vec(solver.augmented_rhs(g));
    m.lu().solve(&b).map(|x| x.as_slice().to_vec())
}

/// Relative max-norm distance of `[u; p; lambda]` to the dense solution.
pub fn oracle_distance(
    solver: &SaddleSolver<'_>,
    blend: Blend,
    g: &[f64],
    u: &[f64],
    p: &[f64],
    lambda: f64,
) -> Option<f64> {
    let x = dense_saddle_solve(solver, blend, g)?;
    let mut ours = u.to_vec();
    ours.extend_from_slice(p);
    ours.push(lambda);
    Some(max_diff(&ours, &x) / max_abs(&x).max(f64::MIN_POSITIVE))
}

/// Runs the suite with generator seed `seed`.
pub fn verify(seed: u64, fault: Fault) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerifyReport::default();
    report.record("time quadrature P1 exactness", check_time_rules(&mut rng));
    report.record("spatial quadrature exactness", check_spatial_rules(&mut rng));
    for (name, outcome) in check_oracles(&mut rng) {
        report.record(name, outcome);
    }
    report.record("divergence-freeness", check_divergence(fault));
    report.record("collocation C1/C0 continuity", check_continuity());
    report.record("collocation residual", check_collocation_residual());
    report.record("forcing vs finite differences", check_forcing(&mut rng));
    report.record("zero data gives zero output", check_zero_data());
    report
}

fn check_time_rules(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (c0, c1) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let a = rng.gen_range(0.0..1.0);
        let tau = rng.gen_range(0.01..2.0);
        let g = |t: f64| c0 + c1 * t;
        let exact = c0 * tau + 0.5 * c1 * ((a + tau) * (a + tau) - a * a);
        let scale = exact.abs().max(1.0);
        worst = worst.max((quad_gauss_lobatto(g(a), g(a + tau), tau) - exact).abs() / scale);
        worst = worst.max((quad_gauss_midpoint(g(a + 0.5 * tau), tau) - exact).abs() / scale);
        for k in 1..=5 {
            let rule = GaussRule1d::new(k)?;
            let deg = 2 * k - 1;
            let exact = (((a + tau).powi(deg as i32 + 1)) - a.powi(deg as i32 + 1)) / (deg as f64 + 1.0);
            let got = rule.integrate(a, a + tau, |t| t.powi(deg as i32));
            worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
        }
    }
    Ok((worst <= 1e-13, format!("max relative error {worst:.2e}")))
}

fn check_spatial_rules(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 1..=MAX_POINTS_PER_AXIS {
        let q = gauss_rule_2d(k)?;
        let top = 2 * k - 1;
        for _ in 0..5 {
            let (i, j) = (rng.gen_range(0..=top), rng.gen_range(0..=top));
            let got: f64 = q
                .points
                .iter()
                .zip(&q.weights)
                .map(|(x, w)| w * x[0].powi(i as i32) * x[1].powi(j as i32))
                .sum();
            let exact = 1.0 / ((i + 1) * (j + 1)) as f64;
            worst = worst.max((got - exact).abs() / exact);
        }
    }
    Ok((worst <= 1e-13, format!("max relative error {worst:.2e}")))
}

type Named = (&'static str, Result<(bool, String)>);

fn oracle_outcome(d: Option<f64>) -> Result<(bool, String)> {
    Ok(match d {
        Some(d) => (d <= ORACLE_TOLERANCE, format!("relative distance {d:.2e}")),
        None => (false, "dense system is singular".to_string()),
    })
}

/// Every saddle solve on a 2x2 mesh with two steps against the dense solve.
fn check_oracles(rng: &mut ChaCha8Rng) -> Vec<Named> {
    let setup = || -> Result<Discretization> { Discretization::unit_square(2) };
    let disc = match setup() {
        Ok(d) => d,
        Err(e) => {
            let msg = format!("error: {e}");
            return vec![("oracle: setup", Ok((false, msg)))];
        }
    };
    let solver = disc.solver(DEFAULT_TOLERANCE);
    let ex = ManufacturedSolution;
    let f = |x: [f64; 2], t: f64| ex.forcing(x, t);
    let ops = &disc.ops;
    let mut out: Vec<Named> = Vec::new();

    // Two steps from a random (not necessarily solenoidal) start.
    let two_steps = || TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, 2);
    let step_check = (|| -> Result<(bool, String)> {
        let tm = two_steps()?;
        let mut u: Vec<f64> = (0..ops.n_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut worst = 0.0f64;
        for n in 1..=2 {
            let tau = tm.tau(n);
            let mean = disc.interval_load(&f, tm.t(n - 1), tm.t(n))?;
            let res = step_with_mean_load(&solver, &u, &mean, tau)?;
            let mut g = ops.mass.mul_vec(&u);
            for (r, l) in g.iter_mut().zip(&mean) {
                *r += 0.5 * tau * l;
            }
            let blend = Blend::new(1.0, 0.5 * tau).with_pressure_scale(0.5 * tau);
            let lambda = solver.solve(blend, &g)?.multiplier;
            match oracle_distance(&solver, blend, &g, &res.velocity, &res.pressure, lambda) {
                Some(d) => worst = worst.max(d),
                None => return oracle_outcome(None),
            }
            u = res.velocity.iter().zip(&u).map(|(b, a)| 2.0 * b - a).collect();
        }
        oracle_outcome(Some(worst))
    })();
    out.push(("oracle: time step", step_check));

    let init_check = (|| -> Result<(bool, String)> {
        let tm = two_steps()?;
        let traj = march(&disc, &solver, &vec![0.0; ops.n_velocity()], &tm, &f)?;
        let (a, p) = collocation_init(&disc, &solver, &traj, &f)?;
        let load = disc.collocation_load(&f, 0.0);
        let au = ops.stiffness.mul_vec(traj.nodal_velocity(0));
        let g: Vec<f64> = load.iter().zip(&au).map(|(l, x)| l - x).collect();
        let blend = Blend::new(1.0, 0.0);
        let lambda = solver.solve(blend, &g)?.multiplier;
        oracle_outcome(oracle_distance(&solver, blend, &g, &a, &p, lambda))
    })();
    out.push(("oracle: collocation initial solve", init_check));

    let accel = initial_acceleration(&disc, &solver, |x| ex.acceleration_data_grad(x, 0.0));
    let accel_check = match &accel {
        Err(e) => Ok((false, format!("error: {e}"))),
        Ok((a, p)) => (|| {
            let g = assemble_gradient_load(&disc.space, &disc.quad, |x| ex.acceleration_data_grad(x, 0.0));
            let blend = Blend::new(0.0, 1.0);
            let lambda = solver.solve(blend, &g)?.multiplier;
            oracle_outcome(oracle_distance(&solver, blend, &g, a, p, lambda))
        })(),
    };
    out.push(("oracle: initial acceleration", accel_check));

    let stokes_check = accel.and_then(|(a0, _)| {
        let (u, p) = initial_stokes_data(&disc, &solver, &a0, |x| ex.forcing(x, 0.0))?;
        let load = assemble_load(&disc.space, &disc.quad, |x| ex.forcing(x, 0.0));
        let ma = ops.mass.mul_vec(&a0);
        let g: Vec<f64> = load.iter().zip(&ma).map(|(l, m)| l - m).collect();
        let blend = Blend::new(0.0, 1.0);
        let lambda = solver.solve(blend, &g)?.multiplier;
        oracle_outcome(oracle_distance(&solver, blend, &g, &u, &p, lambda))
    });
    out.push(("oracle: initial Stokes data", stokes_check));
    out
}

/// Negates the x-velocity columns of `B`.
pub fn flip_divergence_sign(ops: &mut StokesOperators) {
    let n_x = ops.n_velocity() / 2;
    let n_rows = ops.divergence.n_rows();
    let starts = ops.divergence.row_ptr().to_vec();
    let cols = ops.divergence.col_idx().to_vec();
    let vals = ops.divergence.values_mut();
    for r in 0..n_rows {
        for i in starts[r]..starts[r + 1] {
            if cols[i] < n_x {
                vals[i] = -vals[i];
            }
        }
    }
}

fn table_setup(n: usize) -> Result<Discretization> {
    Discretization::unit_square(n)?.with_load_options(LoadOptions::LOBATTO)
}

fn check_divergence(fault: Fault) -> Result<(bool, String)> {
    let mut disc = table_setup(4)?;
    // Measure with an independently assembled B.
    let clean = assemble_operators(&disc.space, &gauss_rule_2d(ASSEMBLY_POINTS_PER_AXIS)?)?;
    if fault == Fault::FlipDivergenceSign {
        flip_divergence_sign(&mut disc.ops);
    }
    let solver = disc.solver(DEFAULT_TOLERANCE);
    let ex = ManufacturedSolution;
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, 4)?;
    let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &|x, t| {
        ex.forcing(x, t)
    })?;
    let mut worst = 0.0f64;
    for n in 1..=tm.num_intervals() {
        worst = worst.max(max_abs(&clean.divergence_of(traj.midpoint_velocity(n))));
        worst = worst.max(max_abs(&clean.divergence_of(traj.nodal_velocity(n))));
    }
    Ok((worst <= DIVERGENCE_TOLERANCE, format!("max |B u| = {worst:.2e}")))
}

fn check_continuity() -> Result<(bool, String)> {
    let disc = table_setup(4)?;
    let solver = disc.solver(DEFAULT_TOLERANCE);
    let ex = ManufacturedSolution;
    let f = |x: [f64; 2], t: f64| ex.forcing(x, t);
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, 8)?;
    let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &f)?;
    // Solving the collocation conditions on every interval independently
    // must produce matching one-sided values at interior nodes.
    let local = CollocationTrajectory::local(&disc, &solver, &traj, &f)?;
    let (da, dp) = local.continuity_defect();
    let scale_a = (0..tm.num_intervals())
        .map(|k| max_abs(&local.nodal_acceleration(k)))
        .fold(1.0, f64::max);
    let scale_p = (0..tm.num_intervals())
        .map(|k| max_abs(&local.nodal_pressure(k)))
        .fold(1.0, f64::max);
    let (ra, rp) = (da / scale_a, dp / scale_p);
    let ok = ra <= CONTINUITY_TOLERANCE && rp <= CONTINUITY_TOLERANCE;
    Ok((ok, format!("jumps: dt u~ {ra:.2e}, p~ {rp:.2e} (relative)")))
}

fn check_collocation_residual() -> Result<(bool, String)> {
    let disc = table_setup(4)?;
    let solver = disc.solver(DEFAULT_TOLERANCE);
    let ex = ManufacturedSolution;
    let f = |x: [f64; 2], t: f64| ex.forcing(x, t);
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, 8)?;
    let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &f)?;
    let ct = collocate(&disc, &solver, &traj, &f)?;
    let scale = (0..=tm.num_intervals())
        .map(|k| max_abs(&disc.collocation_load(&f, tm.t(k))))
        .fold(0.0, f64::max)
        .max(1.0);
    let mut worst = 0.0f64;
    for k in 0..=tm.num_intervals() {
        worst = worst.max(ct.collocation_residual(&disc, &f, k));
        if k >= 1 {
            worst = worst.max(ct.collocation_residual_left(&disc, &f, k));
        }
    }
    let rel = worst / scale;
    Ok((
        rel <= RESIDUAL_TOLERANCE,
        format!("max residual {rel:.2e} x load scale"),
    ))
}

/// Fourth-order central difference of `g` at zero with step `h`.
fn d1(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-g(2.0 * h) + 8.0 * g(h) - 8.0 * g(-h) + g(-2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second difference.
fn d2(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h)
}

fn check_forcing(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let ex = ManufacturedSolution;
    let h = 1e-3;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
        let t = rng.gen_range(0.05..1.95);
        let f = ex.forcing(x, t);
        for c in 0..2 {
            let u = |dx: f64, dy: f64, dt: f64| ex.velocity([x[0] + dx, x[1] + dy], t + dt)[c];
            let dudt = d1(|s| u(0.0, 0.0, s), h);
            let lap = d2(|s| u(s, 0.0, 0.0), h) + d2(|s| u(0.0, s, 0.0), h);
            let dir = if c == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            let gp = d1(|s| ex.pressure([x[0] + s * dir[0], x[1] + s * dir[1]], t), h);
            worst = worst.max((f[c] - (dudt - lap + gp)).abs());
        }
    }
    Ok((worst <= FORCING_FD_TOLERANCE, format!("max deviation {worst:.2e}")))
}

fn check_zero_data() -> Result<(bool, String)> {
    let disc = table_setup(2)?;
    let solver = disc.solver(DEFAULT_TOLERANCE);
    let zero = |_: [f64; 2], _: f64| [0.0, 0.0];
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, 4)?;
    let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &zero)?;
    let ct = collocate(&disc, &solver, &traj, &zero)?;
    let it = InterpolationTrajectory::new(&traj)?;
    let mut worst = 0.0f64;
    for k in 0..=tm.num_intervals() {
        worst = worst.max(max_abs(traj.nodal_velocity(k)));
        worst = worst.max(max_abs(&ct.nodal_acceleration(k)));
        worst = worst.max(max_abs(&ct.nodal_pressure(k)));
        worst = worst.max(max_abs(&it.eval(tm.t(k))?));
    }
    for n in 1..=tm.num_intervals() {
        worst = worst.max(max_abs(traj.midpoint_pressure(n)));
        worst = worst.max(max_abs(ct.lifting(n)));
    }
    Ok((worst == 0.0, format!("max |output| = {worst:e}")))
}
