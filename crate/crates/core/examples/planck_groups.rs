//! Group structure of the Fleck-Cummings test: Planck fractions and group
//! mean opacities at a few material temperatures.

use mlqd::spectral::{group_coefficients, GroupStructure, PhysicalConstants};

fn main() -> mlqd::Result<()> {
    let groups = GroupStructure::fleck_cummings_default();
    let consts = PhysicalConstants::default();
    let temperatures = [0.001, 0.01, 0.1, 1.0];

    print!("{:>22}", "group [keV]");
    for t in temperatures {
        print!(" {:>21}", format!("T = {t} keV"));
    }
    println!();
    let coeffs = temperatures
        .iter()
        .map(|&t| group_coefficients(t, &groups, &consts))
        .collect::<mlqd::Result<Vec<_>>>()?;
    for g in 0..groups.num_groups() {
        let (lo, hi) = groups.bounds(g);
        print!("{:>22}", format!("[{lo:.4}, {hi:.4}]"));
        for (t, c) in temperatures.iter().zip(&coeffs) {
            let total = 0.5 * consts.c * consts.a_rad * t.powi(4);
            print!(" {:>9.3e} {:>11.4e}", c.emission[g] / total, c.opacity[g]);
        }
        println!();
    }
    println!("\ncolumns per temperature: Planck fraction, group opacity [1/cm]");
    Ok(())
}
