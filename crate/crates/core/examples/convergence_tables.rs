//! Convergence study over levels 0..=3 for both post-processings, printed
//! as Markdown tables.
//!
//! `cargo run --release --example convergence_tables`

use stokes_core::analysis::{run_convergence_study, StudyConfig, Variant};
use stokes_core::report::to_markdown;

fn main() -> stokes_core::Result<()> {
    let result = run_convergence_study(&StudyConfig::default())?;
    for variant in [Variant::Collocation, Variant::Interpolation] {
        println!("{}", to_markdown(result.report(variant)));
    }
    Ok(())
}
