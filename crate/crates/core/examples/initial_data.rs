//! Discrete initial acceleration and initial Stokes data under mesh
//! refinement, with observed orders of convergence.
//!
//! `cargo run --release --example initial_data`

use stokes_core::analysis::{eoc, ErrorQuadrature, ManufacturedSolution};
use stokes_core::timestepping::{initial_acceleration, initial_stokes_data, Discretization};

fn main() -> stokes_core::Result<()> {
    let ex = ManufacturedSolution;
    let q = ErrorQuadrature::new(5)?;
    let mut prev: Option<(f64, f64, f64)> = None;
    println!(
        "{:>5} {:>14} {:>6} {:>14} {:>6} {:>14} {:>6}",
        "n", "|a0 - a0h|_L2", "EOC", "|a0 - a0h|_H1", "EOC", "|u0h|_H1", "EOC"
    );
    for n in [4, 8, 16, 32] {
        let disc = Discretization::unit_square(n)?;
        let solver = disc.solver(1e-10);
        let (a0, _) = initial_acceleration(&disc, &solver, |x| ex.acceleration_data_grad(x, 0.0))?;
        let (u0, _) = initial_stokes_data(&disc, &solver, &a0, |x| ex.forcing(x, 0.0))?;
        let ea = q.velocity_error(&disc.space, &a0, |x| {
            (ex.velocity_dt(x, 0.0), ex.velocity_dt_grad(x, 0.0))
        });
        let eu = q
            .velocity_error(&disc.space, &u0, |_| ([0.0; 2], [[0.0; 2]; 2]))
            .h1_full();
        let cur = (ea.l2, ea.h1_full(), eu);
        let rate = |a: f64, b: f64| eoc(a, b).map(|r| format!("{r:6.2}")).unwrap_or_default();
        let (r1, r2, r3) = match prev {
            Some(p) => (rate(p.0, cur.0), rate(p.1, cur.1), rate(p.2, cur.2)),
            None => Default::default(),
        };
        println!(
            "{n:5} {:14.6e} {r1:>6} {:14.6e} {r2:>6} {:14.6e} {r3:>6}",
            cur.0, cur.1, cur.2
        );
        prev = Some(cur);
    }
    Ok(())
}
