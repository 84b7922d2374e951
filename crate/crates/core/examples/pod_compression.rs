//! Singular value decay of the Fleck-Cummings intensity and of its P2
//! remainder, and the reconstruction error of each at every rank.
//!
//! The intensity is taken from a full-storage run stopped at the requested
//! time (default 1 ns) in the requested group (default 8).
//!
//! ```text
//! cargo run --release --example pod_compression -- [time group]
//! ```

use mlqd::compression::{compress_full_intensity, compress_remainder, svd_reduced, Scheme};
use mlqd::timestepper::{advance_step, Problem, SimulationState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let t_stop: f64 = args.first().map(|s| s.parse()).transpose()?.unwrap_or(1.0);
    let group: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(8);

    let problem = Problem::fleck_cummings().with_end_time(t_stop)?;
    let quad = &problem.quadrature;
    let mut state = SimulationState::initial(&problem, Scheme::Full)?;
    for &dt in problem.time.steps() {
        advance_step(&problem, Scheme::Full, &mut state, dt)?;
    }
    let g = group.min(problem.groups.num_groups() - 1);
    let intensity = state.groups[g].intensity.reconstruct(quad)?;

    let full = svd_reduced(&intensity).sigma;
    let rt = compress_remainder(&intensity, quad, 0)?;
    let remainder = intensity.minus(&rt.reconstruct(quad)?)?;
    let rest = svd_reduced(&remainder).sigma;

    println!(
        "group {g} at t = {:.3} ns, |A|_F = {:.4e}",
        state.time,
        intensity.frobenius_norm()
    );
    println!(
        "{:>4} {:>12} {:>12} {:>14} {:>14}",
        "k", "sigma_k", "sigma'_k", "POD-I error", "POD-RT error"
    );
    for k in 0..full.len() {
        let rank = k + 1;
        let pod_i = compress_full_intensity(&intensity, rank)?.reconstruct();
        let pod_rt = compress_remainder(&intensity, quad, rank)?.reconstruct(quad)?;
        println!(
            "{:>4} {:>12.4e} {:>12.4e} {:>14.4e} {:>14.4e}",
            rank,
            full[k],
            rest[k],
            intensity.minus(&pod_i)?.frobenius_norm(),
            intensity.minus(&pod_rt)?.frobenius_norm()
        );
    }
    Ok(())
}
