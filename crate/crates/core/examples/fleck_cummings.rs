//! Runs the Fleck-Cummings problem with the full-intensity reference scheme
//! and prints the temperature profile at a few times.
//!
//! ```text
//! cargo run --release --example fleck_cummings
//! ```

use std::time::Instant;

use mlqd::compression::Scheme;
use mlqd::timestepper::{run, Problem};

fn main() -> mlqd::Result<()> {
    let problem = Problem::fleck_cummings();
    let start = Instant::now();
    let out = run(&problem, Scheme::Full)?;
    let outer = &out.outer_iterations;
    println!(
        "{} steps in {:.2?}; outer iterations per step: min {}, max {}, mean {:.1}",
        outer.len(),
        start.elapsed(),
        outer.iter().min().unwrap_or(&0),
        outer.iter().max().unwrap_or(&0),
        outer.iter().sum::<usize>() as f64 / outer.len().max(1) as f64
    );
    let centers = problem.mesh.centers();
    for t in [0.4, 1.0, 6.0] {
        let snap = out.snapshot_at(t);
        println!("\nt = {:.2} ns", snap.time);
        println!("{:>8} {:>14} {:>14}", "x [cm]", "T [keV]", "E [Jk/cm^3]");
        for j in (0..centers.len()).step_by(10) {
            println!(
                "{:>8.3} {:>14.6e} {:>14.6e}",
                centers[j], snap.temperature[j], snap.energy[j]
            );
        }
    }
    Ok(())
}
