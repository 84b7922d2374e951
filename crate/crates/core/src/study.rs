//! Multi-run studies: rank sweeps and grid refinement against same-grid
//! full-storage references.

use rayon::prelude::*;

use crate::compression::Scheme;
use crate::error::{Error, Result};
use crate::metrics::{refinement_table, rel_inf_error, run_errors, FieldErrors, RefinementTable};
use crate::timestepper::{run, Problem, RunOutput};

/// Output times of the refinement studies, in ns.
pub const REFINEMENT_TIMES: [f64; 3] = [0.4, 1.0, 6.0];

/// Runs of several schemes with their errors against a full-storage run.
#[derive(Debug, Clone)]
pub struct RankSweep {
    pub reference: RunOutput,
    pub runs: Vec<(Scheme, RunOutput)>,
}

impl RankSweep {
    pub fn run(problem: &Problem, schemes: &[Scheme]) -> Result<Self> {
        let reference = run(problem, Scheme::Full)?;
        let runs = schemes
            .par_iter()
            .map(|&s| Ok((s, run(problem, s)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { reference, runs })
    }

    pub fn output(&self, scheme: Scheme) -> Option<&RunOutput> {
        self.runs.iter().find(|(s, _)| *s == scheme).map(|(_, o)| o)
    }

    /// Error series of `scheme` at every step.
    pub fn errors(&self, scheme: Scheme) -> Option<Result<Vec<FieldErrors>>> {
        self.output(scheme).map(|o| run_errors(o, &self.reference))
    }

    /// Errors of `scheme` at the snapshot closest to `t`.
    pub fn errors_at(&self, scheme: Scheme, t: f64) -> Option<Result<FieldErrors>> {
        let out = self.output(scheme)?;
        Some(errors_at(out, &self.reference, t))
    }
}

fn errors_at(run: &RunOutput, reference: &RunOutput, t: f64) -> Result<FieldErrors> {
    let a = run.snapshot_at(t);
    let b = reference.snapshot_at(t);
    Ok(FieldErrors {
        time: b.time,
        temperature: rel_inf_error(&a.temperature, &b.temperature)?,
        energy: rel_inf_error(&a.energy, &b.energy)?,
    })
}

/// Temperature and energy refinement tables of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub scheme: Scheme,
    pub temperature: RefinementTable,
    pub energy: RefinementTable,
}

fn refine(
    variants: &[(f64, Problem)],
    schemes: &[Scheme],
    times: &[f64],
) -> Result<Vec<Refinement>> {
    let sweeps = variants
        .iter()
        .map(|(h, p)| {
            log::info!(
                "refinement grid {h}: J = {}, {} steps",
                p.mesh.num_cells(),
                p.time.num_steps()
            );
            Ok((*h, RankSweep::run(p, schemes)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let borrowed: Vec<(f64, &RankSweep)> = sweeps.iter().map(|(h, s)| (*h, s)).collect();
    refinement_tables(&borrowed, schemes, times)
}

/// Refinement tables of `schemes` from sweeps already run on each grid,
/// listed coarse to fine with their grid parameter.
pub fn refinement_tables(
    sweeps: &[(f64, &RankSweep)],
    schemes: &[Scheme],
    times: &[f64],
) -> Result<Vec<Refinement>> {
    schemes
        .iter()
        .map(|&scheme| {
            let mut t_rows = Vec::new();
            let mut e_rows = Vec::new();
            for (h, sweep) in sweeps {
                let errs = times
                    .iter()
                    .map(|&t| {
                        sweep.errors_at(scheme, t).ok_or_else(|| {
                            Error::invalid(format!("{} was not run", scheme.label()))
                        })?
                    })
                    .collect::<Result<Vec<_>>>()?;
                t_rows.push((*h, errs.iter().map(|e| e.temperature).collect()));
                e_rows.push((*h, errs.iter().map(|e| e.energy).collect()));
            }
            Ok(Refinement {
                scheme,
                temperature: refinement_table(times, &t_rows)?,
                energy: refinement_table(times, &e_rows)?,
            })
        })
        .collect()
}

/// Refines the spatial mesh of `base` over `cells` (coarse to fine) at a
/// fixed time step; the grid parameter of each row is the cell width.
pub fn spatial_refinement(
    base: &Problem,
    cells: &[usize],
    schemes: &[Scheme],
    times: &[f64],
) -> Result<Vec<Refinement>> {
    let variants = cells
        .iter()
        .map(|&n| {
            let p = base.clone().with_cells(n)?;
            Ok((base.mesh.length() / n as f64, p))
        })
        .collect::<Result<Vec<_>>>()?;
    refine(&variants, schemes, times)
}

/// Refines the time step of `base` over `steps` (coarse to fine) on a
/// fixed mesh.
pub fn temporal_refinement(
    base: &Problem,
    steps: &[f64],
    schemes: &[Scheme],
    times: &[f64],
) -> Result<Vec<Refinement>> {
    let variants = steps
        .iter()
        .map(|&dt| Ok((dt, base.clone().with_time_step(dt)?)))
        .collect::<Result<Vec<_>>>()?;
    refine(&variants, schemes, times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{AngularQuadrature, SpatialMesh};
    use crate::spectral::GroupStructure;

    fn tiny() -> Problem {
        let mut p = Problem::fleck_cummings().with_end_time(0.06).unwrap();
        p.mesh = SpatialMesh::uniform(0.6, 6).unwrap();
        p.groups = GroupStructure::new(vec![0.0, 1.0, f64::INFINITY]).unwrap();
        p.quadrature = AngularQuadrature::double_gauss(2).unwrap();
        p
    }

    #[test]
    fn full_rank_sweep_has_negligible_error() {
        let p = tiny();
        let sweep = RankSweep::run(&p, &[Scheme::PodI { rank: 4 }]).unwrap();
        let errs = sweep.errors(Scheme::PodI { rank: 4 }).unwrap().unwrap();
        assert_eq!(errs.len(), p.time.num_steps() + 1);
        assert!(errs
            .iter()
            .all(|e| e.temperature < 1e-10 && e.energy < 1e-10));
    }

    #[test]
    fn refinement_rows_follow_grids() {
        let p = tiny();
        let r =
            spatial_refinement(&p, &[3, 6], &[Scheme::PodI { rank: 1 }], &[0.02, 0.06]).unwrap();
        assert_eq!(r.len(), 1);
        let grids = &r[0].energy.grids;
        assert_eq!(grids.len(), 2);
        assert!((grids[0] - 0.2).abs() < 1e-15 && (grids[1] - 0.1).abs() < 1e-15);
        assert_eq!(r[0].energy.ratios.len(), 1);
        let r =
            temporal_refinement(&p, &[0.02, 0.01], &[Scheme::PodRt { rank: 0 }], &[0.06]).unwrap();
        assert_eq!(r[0].temperature.errors.len(), 2);
    }
}
