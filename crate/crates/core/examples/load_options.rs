//! The effect of the load treatment on the error tables. The trapezoidal
//! rule in time makes the nodal velocity error almost purely spatial; a
//! 2-point Gauss rule applied to the interpolated forcing adds an O(tau^2)
//! temporal part and shifts the numbers by up to tens of percent.
//!
//! `cargo run --release --example load_options`

use stokes_core::analysis::{run_convergence_study, NormFamily, Quantity, StudyConfig, Variant};
use stokes_core::postprocess::CollocationMode;
use stokes_core::timestepping::LoadOptions;

fn main() -> stokes_core::Result<()> {
    let settings = [
        (
            "2-point Gauss, interpolated, local collocation",
            LoadOptions::INTERPOLATED_GAUSS,
            CollocationMode::LocalSolve,
        ),
        (
            "trapezoidal, quadrature, recurrence",
            LoadOptions::LOBATTO,
            CollocationMode::Recurrence,
        ),
    ];
    for (name, load, collocation) in settings {
        let cfg = StudyConfig {
            load,
            collocation,
            ..StudyConfig::default()
        };
        let res = run_convergence_study(&cfg)?;
        println!("{name}");
        for v in [Variant::Interpolation, Variant::Collocation] {
            let rep = res.report(v);
            let last = rep.records.len() - 1;
            let e = &rep.records[last].errors;
            println!(
                "  {:>13}: u H1 {:.4e}  dt u {:.4e}  p {:.4e}  (L2 in time, level {last})",
                v.name(),
                e.get(NormFamily::L2, Quantity::VelocityH1),
                e.get(NormFamily::L2, Quantity::VelocityDtL2),
                e.get(NormFamily::L2, Quantity::PressureL2),
            );
        }
    }
    Ok(())
}
