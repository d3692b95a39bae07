use stokes_core::analysis::{eoc, ErrorQuadrature, ManufacturedSolution};
use stokes_core::linsolve::DEFAULT_TOLERANCE;
use stokes_core::timestepping::{initial_acceleration, initial_stokes_data, Discretization};

/// H¹ errors of `(a_0h, u_0h)` against `(du/dt(0), 0)` on an `n x n` mesh.
fn errors(n: usize) -> (f64, f64) {
    let ex = ManufacturedSolution;
    let d = Discretization::unit_square(n).unwrap();
    let solver = d.solver(DEFAULT_TOLERANCE);
    let (a0, _) = initial_acceleration(&d, &solver, |x| ex.acceleration_data_grad(x, 0.0)).unwrap();
    let (u0, _) = initial_stokes_data(&d, &solver, &a0, |x| ex.forcing(x, 0.0)).unwrap();
    let q = ErrorQuadrature::new(5).unwrap();
    let ea = q
        .velocity_error(&d.space, &a0, |x| (ex.velocity_dt(x, 0.0), ex.velocity_dt_grad(x, 0.0)))
        .h1_full();
    let eu = q.velocity_error(&d.space, &u0, |_| ([0.0; 2], [[0.0; 2]; 2])).h1_full();
    (ea, eu)
}

#[test]
fn initial_acceleration_and_velocity_converge_at_second_order() {
    let e: Vec<(f64, f64)> = [4, 8, 16].iter().map(|&n| errors(n)).collect();
    for w in e.windows(2) {
        let ra = eoc(w[0].0, w[1].0).unwrap();
        let ru = eoc(w[0].1, w[1].1).unwrap();
        assert!(ra > 1.8, "a0h rate {ra}");
        assert!(ru > 1.8, "u0h rate {ru}");
    }
    assert!(e[2].1 < e[2].0);
}
