//! Collocation post-processing in detail: the lifted velocity and the
//! piecewise linear pressure, their smoothness across time nodes and the
//! collocation residual, for both load treatments and both ways of
//! obtaining the nodal data.
//!
//! `cargo run --release --example collocation`

use stokes_core::analysis::ManufacturedSolution;
use stokes_core::postprocess::{collocate_with, CollocationMode};
use stokes_core::timestepping::{march, Discretization, LoadOptions, TimeMesh};

fn main() -> stokes_core::Result<()> {
    let ex = ManufacturedSolution;
    let f = |x: [f64; 2], t: f64| ex.forcing(x, t);
    let tm = TimeMesh::uniform(ManufacturedSolution::FINAL_TIME, 8)?;

    for (name, load) in [
        ("trapezoidal", LoadOptions::LOBATTO),
        ("2-point Gauss", LoadOptions::INTERPOLATED_GAUSS),
    ] {
        let disc = Discretization::unit_square(16)?.with_load_options(load)?;
        let solver = disc.solver(1e-10);
        let traj = march(&disc, &solver, &vec![0.0; disc.space.n_velocity()], &tm, &f)?;
        for mode in [CollocationMode::Recurrence, CollocationMode::LocalSolve] {
            let ct = collocate_with(mode, &disc, &solver, &traj, &f)?;
            let (da, dp) = ct.continuity_defect();
            let res = (0..=tm.num_intervals())
                .map(|k| ct.collocation_residual(&disc, &f, k))
                .fold(0.0, f64::max);
            println!(
                "{name:>13} load, {mode:?}: jump of dt u~ {da:.2e}, jump of p~ {dp:.2e}, max nodal residual {res:.2e}"
            );
        }
    }
    println!("Under the trapezoidal load both modes coincide and the post-processed");
    println!("functions are smooth. Under the Gauss load the recurrence stays smooth but");
    println!("misses the collocation conditions, while the per-interval solve meets them");
    println!("and jumps at the nodes instead.");
    Ok(())
}
