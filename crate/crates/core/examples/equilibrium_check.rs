//! Starts the Fleck-Cummings slab in equilibrium with black-body inflow on
//! both faces and checks that every scheme keeps it there.
//!
//! ```text
//! cargo run --release --example equilibrium_check -- [temperature steps]
//! ```

use mlqd::compression::Scheme;
use mlqd::metrics::rel_inf_error;
use mlqd::timestepper::{run, Problem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let temperature: f64 = args.first().map(|s| s.parse()).transpose()?.unwrap_or(0.3);
    let steps: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(50);

    let mut problem = Problem::fleck_cummings();
    let dt = problem.time.steps()[0];
    problem = problem.with_end_time(steps as f64 * dt)?;
    problem.initial_temperature = temperature;
    problem.left_temperature = temperature;
    problem.right_temperature = temperature;

    for scheme in [
        Scheme::Full,
        Scheme::PodI { rank: 1 },
        Scheme::PodRt { rank: 0 },
    ] {
        let out = run(&problem, scheme)?;
        let first = &out.snapshots[0];
        let last = out.final_snapshot();
        let max_outer = out.outer_iterations.iter().max().copied().unwrap_or(0);
        println!(
            "{:<10} drift after {} steps: T {:.3e}, E {:.3e}; at most {} outer iterations per step",
            scheme.label(),
            last.step,
            rel_inf_error(&last.temperature, &first.temperature)?,
            rel_inf_error(&last.energy, &first.energy)?,
            max_outer
        );
    }
    Ok(())
}
