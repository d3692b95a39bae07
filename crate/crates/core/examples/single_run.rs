//! One simulation of the manufactured problem: march the scheme, then
//! measure the velocity and both post-processed pressures at a few times.
//!
//! `cargo run --release --example single_run -- [level]`

use stokes_core::analysis::{ErrorMeasurement, ManufacturedSolution, StudyConfig};
use stokes_core::postprocess::{collocate_with, InterpolationTrajectory};
use stokes_core::report::format_sci;
use stokes_core::timestepping::{march, Discretization, TimeMesh};

fn main() -> stokes_core::Result<()> {
    let level: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let cfg = StudyConfig::default();
    let ex = ManufacturedSolution;
    let f = |x: [f64; 2], t: f64| ex.forcing(x, t);

    let disc = Discretization::unit_square(cfg.cells(level))?.with_load_options(cfg.load)?;
    let solver = disc.solver(cfg.tolerance);
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, cfg.steps(level))?;
    println!(
        "level {level}: {} cells per side, {} steps, {} velocity and {} pressure unknowns",
        cfg.cells(level),
        tm.num_intervals(),
        disc.space.n_velocity(),
        disc.space.n_pressure()
    );

    let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &f)?;
    let colloc = collocate_with(cfg.collocation, &disc, &solver, &traj, &f)?;
    let interp = InterpolationTrajectory::new(&traj)?;
    let meas = ErrorMeasurement::new(&disc, cfg.error_points, cfg.time_points)?;

    println!(
        "{:>6} {:>17} {:>17} {:>17}",
        "t", "|u - u_h|_H1", "|p - p_interp|", "|p - p_colloc|"
    );
    for i in 0..=8 {
        let t = 0.25 * i as f64;
        let u = traj.eval_velocity(t)?;
        println!(
            "{t:6.2} {:>17} {:>17} {:>17}",
            format_sci(meas.velocity_h1(&u, t)),
            format_sci(meas.pressure_l2(&interp.eval(t)?, t)),
            format_sci(meas.pressure_l2(&colloc.eval_p_tilde(t)?, t))
        );
    }
    println!(
        "factorizations cached by the solver: {}",
        solver.cached_factorizations()
    );
    Ok(())
}
