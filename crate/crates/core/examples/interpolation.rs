//! Interpolation post-processing: a piecewise linear pressure through the
//! midpoint values, extrapolated on the first interval. Compares it with
//! the exact pressure over the first two intervals and checks the step
//! ratio condition on a graded mesh.
//!
//! `cargo run --release --example interpolation`

use stokes_core::analysis::{ErrorMeasurement, ManufacturedSolution};
use stokes_core::postprocess::{check_timestep_condition, InterpolationTrajectory, DEFAULT_STEP_RATIO};
use stokes_core::timestepping::{march, Discretization, LoadOptions, TimeMesh};

fn main() -> stokes_core::Result<()> {
    let ex = ManufacturedSolution;
    let f = |x: [f64; 2], t: f64| ex.forcing(x, t);
    let disc = Discretization::unit_square(16)?.with_load_options(LoadOptions::INTERPOLATED_GAUSS)?;
    let solver = disc.solver(1e-10);
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, 8)?;
    let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &f)?;
    let it = InterpolationTrajectory::new(&traj)?;
    let meas = ErrorMeasurement::new(&disc, 5, 5)?;

    println!("{:>7} {:>14} {:>14}", "t", "|p - p_interp|", "|p - pbar_n|");
    for i in 0..=10 {
        let t = 0.05 * i as f64;
        let n = tm.interval_of(t.max(1e-12))?;
        println!(
            "{t:7.3} {:14.6e} {:14.6e}",
            meas.pressure_l2(&it.eval(t)?, t),
            meas.pressure_l2(traj.midpoint_pressure(n), t)
        );
    }

    let graded = TimeMesh::new(vec![0.0, 0.1, 0.3, 0.7, 2.0])?;
    println!(
        "uniform mesh satisfies the step ratio condition: {}",
        check_timestep_condition(&tm, DEFAULT_STEP_RATIO, DEFAULT_STEP_RATIO)
    );
    println!(
        "graded mesh {:?} satisfies it: {}",
        graded.nodes(),
        check_timestep_condition(&graded, DEFAULT_STEP_RATIO, DEFAULT_STEP_RATIO)
    );
    Ok(())
}
