mod common;

use common::{max_abs, max_diff};
use stokes_core::analysis::{
    run_convergence_study_with_forcing, ManufacturedSolution, NormFamily, Quantity, StudyConfig, Variant,
};
use stokes_core::linsolve::DEFAULT_TOLERANCE;
use stokes_core::postprocess::{
    collocate, collocate_with, CollocationMode, CollocationTrajectory, InterpolationTrajectory,
};
use stokes_core::timestepping::{march, DiscreteTrajectory, Discretization, LoadOptions, TimeMesh};

fn forcing(x: [f64; 2], t: f64) -> [f64; 2] {
    ManufacturedSolution.forcing(x, t)
}

fn simulate(cells: usize, steps: usize, options: LoadOptions) -> (Discretization, TimeMesh) {
    let d = Discretization::unit_square(cells)
        .unwrap()
        .with_load_options(options)
        .unwrap();
    (d, TimeMesh::uniform(2.0, steps).unwrap())
}

fn trajectory(d: &Discretization, tm: &TimeMesh) -> DiscreteTrajectory {
    let solver = d.solver(DEFAULT_TOLERANCE);
    march(d, &solver, &vec![0.0; d.space.n_velocity()], tm, &forcing).unwrap()
}

fn interior_max(d: &Discretization, v: &[f64]) -> f64 {
    v.iter()
        .zip(&d.ops.boundary)
        .filter(|(_, &b)| !b)
        .fold(0.0, |m, (x, _)| m.max(x.abs()))
}

#[test]
fn crank_nicolson_relation_under_trapezoidal_load() {
    let (d, tm) = simulate(4, 4, LoadOptions::LOBATTO);
    let traj = trajectory(&d, &tm);
    let ops = &d.ops;
    for n in 1..=tm.num_intervals() {
        let tau = tm.tau(n);
        let (u0, u1) = (traj.nodal_velocity(n - 1), traj.nodal_velocity(n));
        let du: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| a - b).collect();
        let su: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| a + b).collect();
        let (l0, l1) = (d.load(&forcing, tm.t(n - 1)), d.load(&forcing, tm.t(n)));
        let md = ops.mass.mul_vec(&du);
        let asum = ops.stiffness.mul_vec(&su);
        let bp = ops.divergence.mul_transpose_vec(traj.midpoint_pressure(n));
        let r: Vec<f64> = (0..md.len())
            .map(|i| md[i] + 0.5 * tau * asum[i] + tau * bp[i] - 0.5 * tau * (l0[i] + l1[i]))
            .collect();
        let scale = 0.5 * tau * interior_max(&d, &l0).max(interior_max(&d, &l1));
        assert!(
            interior_max(&d, &r) <= 1e-10 * scale,
            "step {n}: {:e}",
            interior_max(&d, &r)
        );
    }
}

#[test]
fn nodal_values_follow_midpoint_extrapolation() {
    let (d, tm) = simulate(4, 4, LoadOptions::INTERPOLATED_GAUSS);
    let traj = trajectory(&d, &tm);
    for n in 1..=tm.num_intervals() {
        let expected: Vec<f64> = traj
            .midpoint_velocity(n)
            .iter()
            .zip(traj.nodal_velocity(n - 1))
            .map(|(b, a)| 2.0 * b - a)
            .collect();
        assert_eq!(expected, traj.nodal_velocity(n));
        assert_eq!(traj.eval_velocity(tm.t(n)).unwrap(), traj.nodal_velocity(n));
        let mid = traj.eval_velocity(tm.midpoint(n)).unwrap();
        assert!(max_diff(&mid, traj.midpoint_velocity(n)) <= 1e-14 * max_abs(&mid).max(1.0));
    }
}

#[test]
fn velocities_are_discretely_divergence_free() {
    for options in [LoadOptions::LOBATTO, LoadOptions::INTERPOLATED_GAUSS] {
        let (d, tm) = simulate(8, 8, options);
        let traj = trajectory(&d, &tm);
        for n in 1..=tm.num_intervals() {
            assert!(max_abs(&d.ops.divergence_of(traj.midpoint_velocity(n))) <= 1e-9);
            assert!(max_abs(&d.ops.divergence_of(traj.nodal_velocity(n))) <= 1e-9);
        }
    }
}

#[test]
fn both_pressures_pass_through_midpoint_values() {
    for mode in [CollocationMode::Recurrence, CollocationMode::LocalSolve] {
        let (d, tm) = simulate(4, 4, LoadOptions::INTERPOLATED_GAUSS);
        let traj = trajectory(&d, &tm);
        let solver = d.solver(DEFAULT_TOLERANCE);
        let ct = collocate_with(mode, &d, &solver, &traj, &forcing).unwrap();
        let it = InterpolationTrajectory::new(&traj).unwrap();
        for n in 1..=tm.num_intervals() {
            let pbar = traj.midpoint_pressure(n);
            let scale = max_abs(pbar);
            let tbar = tm.midpoint(n);
            assert!(max_diff(&ct.eval_p_tilde(tbar).unwrap(), pbar) <= 1e-12 * scale);
            assert!(max_diff(&it.eval(tbar).unwrap(), pbar) <= 1e-12 * scale);
        }
    }
}

#[test]
fn collocation_is_c1_with_continuous_pressure_under_trapezoidal_load() {
    let (d, tm) = simulate(4, 8, LoadOptions::LOBATTO);
    let traj = trajectory(&d, &tm);
    let solver = d.solver(DEFAULT_TOLERANCE);
    let local = CollocationTrajectory::local(&d, &solver, &traj, &forcing).unwrap();
    let rec = collocate(&d, &solver, &traj, &forcing).unwrap();
    let scale_a = (0..=8).map(|k| max_abs(&rec.nodal_acceleration(k))).fold(1.0, f64::max);
    let scale_p = (0..=8).map(|k| max_abs(&rec.nodal_pressure(k))).fold(1.0, f64::max);
    for ct in [&local, &rec] {
        let (da, dp) = ct.continuity_defect();
        assert!(da <= 1e-10 * scale_a && dp <= 1e-10 * scale_p, "{da:e} {dp:e}");
    }
    // The one-solve recurrence reproduces the per-interval solves.
    for k in 0..8 {
        assert!(max_diff(&local.nodal_acceleration(k), &rec.nodal_acceleration(k)) <= 1e-10 * scale_a);
        assert!(max_diff(&local.nodal_pressure(k), &rec.nodal_pressure(k)) <= 1e-10 * scale_p);
    }
    // u~ interpolates the nodal velocities; d/dt u~ is continuous in time.
    for k in 1..8 {
        let t = tm.t(k);
        assert_eq!(rec.eval_u_tilde(t).unwrap(), traj.nodal_velocity(k));
        let left = rec.eval_dt_u_tilde(t).unwrap();
        let right = rec.eval_dt_u_tilde_right(t).unwrap();
        assert!(max_diff(&left, &right) <= 1e-10 * scale_a);
    }
}

#[test]
fn collocation_residual_vanishes_at_every_node() {
    let (d, tm) = simulate(4, 8, LoadOptions::LOBATTO);
    let traj = trajectory(&d, &tm);
    let solver = d.solver(DEFAULT_TOLERANCE);
    let ct = collocate(&d, &solver, &traj, &forcing).unwrap();
    let scale = (0..=8)
        .map(|k| max_abs(&d.collocation_load(&forcing, tm.t(k))))
        .fold(0.0, f64::max);
    for k in 0..=8 {
        assert!(ct.collocation_residual(&d, &forcing, k) <= 1e-8 * scale);
        if k > 0 {
            assert!(ct.collocation_residual_left(&d, &forcing, k) <= 1e-8 * scale);
        }
    }
}

#[test]
fn local_collocation_jumps_shrink_under_gauss_load() {
    // Away from the trapezoidal rule the per-interval data no longer glue
    // together; the jumps are a consistency error that vanishes with tau.
    let defect = |level: usize| {
        let (d, tm) = simulate(4 << level, 2 << level, LoadOptions::INTERPOLATED_GAUSS);
        let traj = trajectory(&d, &tm);
        let solver = d.solver(DEFAULT_TOLERANCE);
        CollocationTrajectory::local(&d, &solver, &traj, &forcing)
            .unwrap()
            .continuity_defect()
    };
    let (a1, p1) = defect(1);
    let (a2, p2) = defect(2);
    assert!(a1 > 1e-8 && p1 > 1e-8);
    assert!(a2 < 0.5 * a1 && p2 < 0.5 * p1, "{a1:e}->{a2:e}, {p1:e}->{p2:e}");
}

#[test]
fn zero_forcing_reports_norms_of_the_exact_solution() {
    let cfg = StudyConfig {
        levels: 1..=2,
        ..StudyConfig::default()
    };
    let res = run_convergence_study_with_forcing(&cfg, &|_, _| [0.0, 0.0]).unwrap();
    // Spatial norms of the profiles: |u|^2 = 3/32, |grad u|^2 = pi^2/2,
    // |p|^2 = 1/64; u and p scale with sin t, du/dt with cos t.
    let pi2 = std::f64::consts::PI.powi(2);
    let (u0, g0, p0) = (3.0f64 / 32.0, pi2 / 2.0, 1.0f64 / 64.0);
    let sin2 = 1.0 - (4.0f64).sin() / 4.0;
    let cos2 = 1.0 + (4.0f64).sin() / 4.0;
    for rec in res.interpolation.records.iter().chain(&res.collocation.records) {
        let e = &rec.errors;
        let l2 = |q| e.get(NormFamily::L2, q);
        assert!(common::rel_err(l2(Quantity::VelocityH1), ((u0 + g0) * sin2).sqrt()) < 1e-8);
        assert!(common::rel_err(l2(Quantity::VelocityDtL2), (u0 * cos2).sqrt()) < 1e-8);
        assert!(common::rel_err(l2(Quantity::PressureL2), (p0 * sin2).sqrt()) < 1e-8);
        let tm = TimeMesh::uniform(2.0, cfg.steps(rec.level)).unwrap();
        let sampled = |at: &dyn Fn(usize) -> f64, g: fn(f64) -> f64| {
            (1..=tm.num_intervals())
                .map(|m| tm.tau(m) * g(at(m)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let mid = |m| tm.midpoint(m);
        let left = |m| tm.t(m - 1);
        for (family, at) in [
            (NormFamily::LBar2, &mid as &dyn Fn(usize) -> f64),
            (NormFamily::L2Plus, &left),
        ] {
            let s = sampled(at, f64::sin);
            let c = sampled(at, f64::cos);
            assert!(common::rel_err(e.get(family, Quantity::VelocityH1), (u0 + g0).sqrt() * s) < 1e-8);
            assert!(common::rel_err(e.get(family, Quantity::VelocityDtL2), u0.sqrt() * c) < 1e-8);
            if s > 0.0 {
                assert!(common::rel_err(e.get(family, Quantity::PressureL2), p0.sqrt() * s) < 1e-8);
            }
        }
    }
    assert_eq!(res.interpolation.variant, Variant::Interpolation);
}

#[test]
fn doubling_time_quadrature_is_saturated() {
    let base = StudyConfig {
        levels: 2..=2,
        ..StudyConfig::default()
    };
    let doubled = StudyConfig {
        time_points: 2 * base.time_points,
        ..base.clone()
    };
    let a = stokes_core::analysis::run_convergence_study(&base).unwrap();
    let b = stokes_core::analysis::run_convergence_study(&doubled).unwrap();
    for v in [Variant::Interpolation, Variant::Collocation] {
        for q in Quantity::ALL {
            let (x, y) = (
                a.report(v).records[0].errors.get(NormFamily::L2, q),
                b.report(v).records[0].errors.get(NormFamily::L2, q),
            );
            assert!(common::rel_err(y, x) < 1e-10, "{v:?} {q:?}: {x:e} vs {y:e}");
        }
    }
}
