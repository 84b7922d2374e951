//! Runs the Fleck-Cummings test with both compressed schemes over a range
//! of ranks and reports their errors against the full-storage run.
//!
//! ```text
//! cargo run --release --example rank_sweep -- [max_rank]
//! ```

use mlqd::compression::Scheme;
use mlqd::metrics::ErrorSummary;
use mlqd::study::RankSweep;
use mlqd::timestepper::Problem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let max_rank: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(7);
    let problem = Problem::fleck_cummings();
    let schemes: Vec<Scheme> = (1..=max_rank)
        .flat_map(|rank| [Scheme::PodI { rank }, Scheme::PodRt { rank }])
        .collect();
    let sweep = RankSweep::run(&problem, &schemes)?;

    println!(
        "{:<10} {:>12} {:>12} {:>12} {:>12}",
        "scheme", "T final", "E final", "T max", "E max"
    );
    for &scheme in &schemes {
        let errors = sweep.errors(scheme).expect("scheme was run")?;
        let s = ErrorSummary::of(&errors);
        println!(
            "{:<10} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            scheme.label(),
            s.final_temperature,
            s.final_energy,
            s.max_temperature,
            s.max_energy
        );
    }
    Ok(())
}
