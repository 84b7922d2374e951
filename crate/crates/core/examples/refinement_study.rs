//! Spatial and temporal refinement of the Fleck-Cummings test for both POD
//! schemes at the given ranks.
//!
//! ```text
//! cargo run --release --example refinement_study -- [space|time|both] [ranks, e.g. 1,2,4]
//! ```

use mlqd::compression::Scheme;
use mlqd::study::{spatial_refinement, temporal_refinement, Refinement, REFINEMENT_TIMES};
use mlqd::timestepper::Problem;

fn print(kind: &str, results: &[Refinement]) {
    for r in results {
        println!("{kind} refinement, {}", r.scheme.label());
        for (k, grid) in r.energy.grids.iter().enumerate() {
            let errs: Vec<String> = r.energy.errors[k]
                .iter()
                .map(|e| format!("{e:.3e}"))
                .collect();
            let ratios: Vec<String> = r
                .energy
                .ratios
                .get(k)
                .map(|rs| rs.iter().map(|x| format!("{:.3}", x.value)).collect())
                .unwrap_or_default();
            println!("  {grid:<6} E errors {errs:?} ratios to next {ratios:?}");
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let which = args.first().map(String::as_str).unwrap_or("both");
    let ranks: Vec<usize> = args
        .get(1)
        .map(|s| s.split(',').map(|r| r.parse()).collect::<Result<_, _>>())
        .transpose()?
        .unwrap_or_else(|| vec![1, 2, 4]);
    let schemes: Vec<Scheme> = ranks
        .iter()
        .flat_map(|&rank| [Scheme::PodI { rank }, Scheme::PodRt { rank }])
        .collect();
    let base = Problem::fleck_cummings();
    if which == "space" || which == "both" {
        let r = spatial_refinement(&base, &[25, 50, 100, 200], &schemes, &REFINEMENT_TIMES)?;
        print("spatial", &r);
    }
    if which == "time" || which == "both" {
        let r = temporal_refinement(
            &base,
            &[0.04, 0.02, 0.01, 0.005],
            &schemes,
            &REFINEMENT_TIMES,
        )?;
        print("temporal", &r);
    }
    Ok(())
}
