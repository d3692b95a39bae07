//! Runs the invariant suite, optionally with the divergence fault injected.
//!
//! `cargo run --example verify_suite -- [seed] [--fault]`

use stokes_core::verify::{verify, Fault};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.iter().find_map(|a| a.parse().ok()).unwrap_or(42);
    let fault = if args.iter().any(|a| a == "--fault") {
        Fault::FlipDivergenceSign
    } else {
        Fault::None
    };
    let report = verify(seed, fault);
    print!("{report}");
    println!(
        "{}",
        if report.passed() {
            "all checks passed"
        } else {
            "some checks failed"
        }
    );
}
