//! Time integration of the coupled radiation/material problem.
//!
//! Every time step runs outer iterations of
//! opacities and emission at the current temperature iterate, a
//! transport sweep for each group, the multigroup low-order solve, spectral
//! averaging, and the grey low-order solve coupled to the material energy
//! balance. On convergence the end-of-step cell-average intensity is handed
//! to the configured [`Scheme`] for storage until the next step.

use rayon::prelude::*;

use crate::anderson::Anderson;
use crate::compression::{storage_count, IntensityStore, Matrix, Scheme, StorageDims};
use crate::error::{Error, Result};
use crate::loqd::{
    grey_average, grey_meb_solve, mloqd_solve, BoundaryClosure, GreyPrevious, GroupMoments,
    GroupProblem, LoqdSolution, NewtonOptions,
};
use crate::quadrature::{AngularQuadrature, SpatialMesh, TimeGrid};
use crate::spectral::{group_coefficients, group_emission, GroupStructure, PhysicalConstants};
use crate::transport::{compute_moments, sweep_group, GroupInflow, SweepInput};

/// Stopping rule of the outer iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub temperature: f64,
    pub energy: f64,
    pub max_outer: usize,
    /// low-order cycles per transport sweep
    pub max_inner: usize,
    /// Anderson mixing depth of the low-order cycles (0 for plain iteration)
    pub anderson_depth: usize,
    pub newton: NewtonOptions,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            temperature: 1e-12,
            energy: 1e-12,
            max_outer: 100,
            max_inner: 8,
            anderson_depth: 5,
            newton: NewtonOptions::default(),
        }
    }
}

/// A slab problem with a black-body source on the left, a given inflow
/// temperature on the right (zero for vacuum) and a material with constant
/// heat capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub mesh: SpatialMesh,
    pub quadrature: AngularQuadrature,
    pub groups: GroupStructure,
    pub constants: PhysicalConstants,
    pub time: TimeGrid,
    /// `c_v` in `e = c_v T`
    pub heat_capacity: f64,
    pub initial_temperature: f64,
    pub left_temperature: f64,
    pub right_temperature: f64,
    pub tolerances: Tolerances,
}

impl Problem {
    /// The Fleck-Cummings test: 6 cm slab, 100 cells, 17 groups, 8
    /// directions, `dt = 0.02` ns up to 6 ns, 1 keV inflow on the left.
    pub fn fleck_cummings() -> Self {
        let constants = PhysicalConstants::default();
        let left_temperature: f64 = 1.0;
        Self {
            mesh: SpatialMesh::uniform(6.0, 100).expect("static mesh"),
            quadrature: AngularQuadrature::double_gauss(4).expect("static quadrature"),
            groups: GroupStructure::fleck_cummings_default(),
            constants,
            time: TimeGrid::uniform(0.0, 6.0, 0.02).expect("static time grid"),
            heat_capacity: 0.5917 * constants.a_rad * left_temperature.powi(3),
            initial_temperature: 0.001,
            left_temperature,
            right_temperature: 0.0,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_cells(mut self, cells: usize) -> Result<Self> {
        self.mesh = SpatialMesh::uniform(self.mesh.length(), cells)?;
        Ok(self)
    }

    pub fn with_time_step(mut self, dt: f64) -> Result<Self> {
        self.time = TimeGrid::uniform(self.time.t0(), self.time.t_end(), dt)?;
        Ok(self)
    }

    pub fn with_end_time(mut self, t_end: f64) -> Result<Self> {
        let dt = self.time.steps().first().copied().unwrap_or(0.02);
        self.time = TimeGrid::uniform(self.time.t0(), t_end, dt)?;
        Ok(self)
    }

    pub fn storage_dims(&self) -> StorageDims {
        StorageDims {
            cells: self.mesh.num_cells(),
            dirs: self.quadrature.len(),
            groups: self.groups.num_groups(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heat_capacity > 0.0) {
            return Err(Error::invalid("heat capacity must be positive"));
        }
        if !(self.initial_temperature > 0.0) {
            return Err(Error::invalid("initial temperature must be positive"));
        }
        if !(self.left_temperature >= 0.0) || !(self.right_temperature >= 0.0) {
            return Err(Error::invalid("boundary temperatures must be non-negative"));
        }
        Ok(())
    }

    fn boundary_intensity(&self, t: f64) -> Result<Vec<f64>> {
        if t == 0.0 {
            Ok(vec![0.0; self.groups.num_groups()])
        } else {
            group_emission(t, &self.groups, &self.constants)
        }
    }
}

/// Data of one group carried from one step to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    pub intensity: IntensityStore,
    pub energy: Vec<f64>,
    pub flux: Vec<f64>,
}

/// Everything carried from one step to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub step: usize,
    pub time: f64,
    pub temperature: Vec<f64>,
    pub grey_flux: Vec<f64>,
    pub groups: Vec<GroupState>,
}

impl SimulationState {
    /// Material and radiation in equilibrium at the initial temperature.
    pub fn initial(problem: &Problem, scheme: Scheme) -> Result<Self> {
        problem.validate()?;
        let nj = problem.mesh.num_cells();
        let nm = problem.quadrature.len();
        let c = problem.constants.c;
        let planck = group_emission(
            problem.initial_temperature,
            &problem.groups,
            &problem.constants,
        )?;
        let groups = planck
            .iter()
            .map(|&b| {
                let field = Matrix::new(nj, nm, vec![b; nj * nm])?;
                Ok(GroupState {
                    intensity: IntensityStore::compress(field, scheme, &problem.quadrature)?,
                    energy: vec![2.0 * b / c; nj],
                    flux: vec![0.0; nj + 1],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            step: 0,
            time: problem.time.t0(),
            temperature: vec![problem.initial_temperature; nj],
            grey_flux: vec![0.0; nj + 1],
            groups,
        })
    }

    /// Grey radiation energy density, `sum_g E_g`.
    pub fn energy(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.temperature.len()];
        for g in &self.groups {
            for (a, b) in e.iter_mut().zip(&g.energy) {
                *a += b;
            }
        }
        e
    }

    /// Number of reals held by the state.
    pub fn element_count(&self) -> usize {
        self.groups
            .iter()
            .map(|g| g.intensity.element_count() + g.energy.len() + g.flux.len())
            .sum::<usize>()
            + self.temperature.len()
            + self.grey_flux.len()
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub outer_iterations: usize,
    /// low-order cycles summed over the outer iterations
    pub inner_iterations: usize,
    pub newton_iterations: usize,
    pub averaging_fallbacks: usize,
    pub degenerate_moments: usize,
}

struct SweepOutcome {
    avg: Vec<f64>,
    eddington: Vec<f64>,
    left: BoundaryClosure,
    right: BoundaryClosure,
    degenerate: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff = new
        .iter()
        .zip(old)
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    let scale = max_abs(new);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Advances `state` by one step of size `dt`.
pub fn advance_step(
    problem: &Problem,
    scheme: Scheme,
    state: &mut SimulationState,
    dt: f64,
) -> Result<StepReport> {
    let mesh = &problem.mesh;
    let quad = &problem.quadrature;
    let consts = &problem.constants;
    let nj = mesh.num_cells();
    let ng = problem.groups.num_groups();
    let tol = &problem.tolerances;

    let previous: Vec<Vec<f64>> = state
        .groups
        .par_iter()
        .map(|g| Ok(g.intensity.reconstruct(quad)?.to_direction_major()))
        .collect::<Result<_>>()?;
    let left_b = problem.boundary_intensity(problem.left_temperature)?;
    let right_b = problem.boundary_intensity(problem.right_temperature)?;
    let inflows: Vec<GroupInflow> = (0..ng)
        .map(|g| GroupInflow::isotropic(quad.len(), left_b[g], right_b[g]))
        .collect();
    let prev_energy = state.energy();

    let mut temperature = state.temperature.clone();
    let mut energy = prev_energy.clone();
    let mut history = Vec::new();
    let mut fallbacks = 0;
    let coefficients = |temperature: &[f64]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        // indexed [g][j]
        let mut opacity = vec![vec![0.0; nj]; ng];
        let mut planck = vec![vec![0.0; nj]; ng];
        for (j, &t) in temperature.iter().enumerate() {
            let coeffs = group_coefficients(t, &problem.groups, consts)?;
            for g in 0..ng {
                opacity[g][j] = coeffs.opacity[g];
                planck[g][j] = coeffs.emission[g];
            }
        }
        Ok((opacity, planck))
    };

    let mut total_inner = 0;
    for outer in 1..=tol.max_outer {
        let (mut opacity, mut planck) = coefficients(&temperature)?;
        let sweeps: Vec<SweepOutcome> = (0..ng)
            .into_par_iter()
            .map(|g| {
                let source: Vec<f64> = opacity[g]
                    .iter()
                    .zip(&planck[g])
                    .map(|(k, b)| k * b)
                    .collect();
                let field = sweep_group(
                    mesh,
                    quad,
                    &SweepInput {
                        opacity: &opacity[g],
                        source: &source,
                        previous: &previous[g],
                        inflow: &inflows[g],
                        dt,
                        c: consts.c,
                    },
                )?;
                let moments = compute_moments(&field, quad, consts.c);
                Ok(SweepOutcome {
                    avg: field.avg,
                    eddington: moments.eddington,
                    left: BoundaryClosure::from_transport(&moments.left),
                    right: BoundaryClosure::from_transport(&moments.right),
                    degenerate: moments.degenerate,
                })
            })
            .collect::<Result<_>>()?;

        let outer_start = (temperature.clone(), energy.clone());
        let mut low_order = None;
        let mut mixer = Anderson::new(tol.anderson_depth);
        for inner in 1..=tol.max_inner {
            if inner > 1 {
                (opacity, planck) = coefficients(&temperature)?;
            }
            let problems: Vec<GroupProblem<'_>> = sweeps
                .iter()
                .enumerate()
                .map(|(g, s)| GroupProblem {
                    opacity: &opacity[g],
                    planck: &planck[g],
                    eddington: &s.eddington,
                    left: s.left,
                    right: s.right,
                    prev_energy: &state.groups[g].energy,
                    prev_flux: &state.groups[g].flux,
                })
                .collect();
            let solutions: Vec<LoqdSolution> = problems
                .par_iter()
                .enumerate()
                .map(|(g, p)| mloqd_solve(mesh, consts, dt, g, p))
                .collect::<Result<_>>()?;
            let group_moments: Vec<GroupMoments<'_>> = problems
                .iter()
                .zip(&solutions)
                .map(|(p, s)| GroupMoments {
                    problem: *p,
                    solution: s,
                })
                .collect();
            let coeffs = grey_average(mesh, &group_moments);
            fallbacks = coeffs.fallbacks;
            let grey = grey_meb_solve(
                mesh,
                consts,
                problem.heat_capacity,
                &coeffs,
                &GreyPrevious {
                    energy: &prev_energy,
                    flux: &state.grey_flux,
                    temperature: &state.temperature,
                },
                &temperature,
                dt,
                &tol.newton,
            )?;
            let d_t = relative_change(&grey.temperature, &temperature);
            let d_e = relative_change(&grey.radiation.energy, &energy);
            let converged = d_t < tol.temperature && d_e < tol.energy;
            temperature = if converged || inner == tol.max_inner {
                grey.temperature.clone()
            } else {
                mixer.next(&temperature, &grey.temperature)
            };
            energy.clone_from(&grey.radiation.energy);
            total_inner += 1;
            low_order = Some((solutions, grey));
            if converged {
                break;
            }
        }
        let (solutions, grey) = low_order.expect("at least one inner cycle");

        let d_t = relative_change(&temperature, &outer_start.0);
        let d_e = relative_change(&energy, &outer_start.1);
        history.push(d_t.max(d_e));
        log::trace!(
            "step {} outer {outer}: dT {d_t:.3e} dE {d_e:.3e}",
            state.step + 1
        );

        if d_t < tol.temperature && d_e < tol.energy {
            let degenerate = sweeps.iter().map(|s| s.degenerate).sum();
            let groups = sweeps
                .into_iter()
                .zip(solutions)
                .map(|(s, sol)| {
                    let field = Matrix::from_direction_major(&s.avg, nj, quad.len())?;
                    Ok(GroupState {
                        intensity: IntensityStore::compress(field, scheme, quad)?,
                        energy: sol.energy,
                        flux: sol.flux,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            state.groups = groups;
            state.temperature = temperature;
            state.grey_flux = grey.radiation.flux;
            state.step += 1;
            state.time += dt;
            return Ok(StepReport {
                outer_iterations: outer,
                inner_iterations: total_inner,
                newton_iterations: grey.iterations,
                averaging_fallbacks: fallbacks,
                degenerate_moments: degenerate,
            });
        }
    }
    log::warn!("outer iterations did not converge, {fallbacks} averaging fallbacks");
    Err(Error::NotConverged {
        what: format!("outer iterations at step {}", state.step + 1),
        iterations: tol.max_outer,
        last_change: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Temperature and grey radiation energy at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub temperature: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Snapshot {
    fn of(state: &SimulationState) -> Self {
        Self {
            step: state.step,
            time: state.time,
            temperature: state.temperature.clone(),
            energy: state.energy(),
        }
    }
}

/// Result of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub scheme: Scheme,
    /// initial state followed by every completed step
    pub snapshots: Vec<Snapshot>,
    pub outer_iterations: Vec<usize>,
    pub inner_iterations: Vec<usize>,
    /// reals held by the state initially and after each step
    pub persisted_counts: Vec<usize>,
    /// the scheme's nominal storage count
    pub storage_count: usize,
}

impl RunOutput {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("initial snapshot is always present")
    }

    /// Snapshot closest to time `t`.
    pub fn snapshot_at(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .expect("initial snapshot is always present")
    }
}

/// Runs the problem over its whole time grid.
pub fn run(problem: &Problem, scheme: Scheme) -> Result<RunOutput> {
    let mut state = SimulationState::initial(problem, scheme)?;
    let mut snapshots = vec![Snapshot::of(&state)];
    let mut outer_iterations = Vec::with_capacity(problem.time.num_steps());
    let mut inner_iterations = Vec::with_capacity(problem.time.num_steps());
    let mut persisted_counts = Vec::with_capacity(problem.time.num_steps() + 1);
    persisted_counts.push(state.element_count());
    for (n, &dt) in problem.time.steps().iter().enumerate() {
        let report = advance_step(problem, scheme, &mut state, dt)?;
        // keep the time exact on the grid
        state.time = problem.time.time_at(n + 1);
        log::debug!(
            "{} step {} t={:.4}: {} outer, {} Newton",
            scheme.label(),
            n + 1,
            state.time,
            report.outer_iterations,
            report.newton_iterations
        );
        outer_iterations.push(report.outer_iterations);
        inner_iterations.push(report.inner_iterations);
        persisted_counts.push(state.element_count());
        snapshots.push(Snapshot::of(&state));
    }
    Ok(RunOutput {
        scheme,
        snapshots,
        outer_iterations,
        inner_iterations,
        persisted_counts,
        storage_count: storage_count(scheme, problem.storage_dims()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_problem() -> Problem {
        let mut p = Problem::fleck_cummings()
            .with_cells(10)
            .unwrap()
            .with_time_step(0.02)
            .unwrap()
            .with_end_time(0.1)
            .unwrap();
        p.mesh = SpatialMesh::uniform(0.6, 10).unwrap();
        p.groups = GroupStructure::new(vec![0.0, 0.5, 2.0, f64::INFINITY]).unwrap();
        p.quadrature = AngularQuadrature::double_gauss(2).unwrap();
        p
    }

    #[test]
    fn equilibrium_needs_at_most_two_outer_iterations() {
        let mut p = small_problem();
        p.initial_temperature = 0.3;
        p.left_temperature = 0.3;
        p.right_temperature = 0.3;
        let out = run(&p, Scheme::Full).unwrap();
        assert!(
            out.outer_iterations.iter().all(|&n| n <= 2),
            "{:?}",
            out.outer_iterations
        );
        let last = out.final_snapshot();
        for t in &last.temperature {
            assert!(((t - 0.3) / 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_is_conserved() {
        let p = small_problem();
        let mut state = SimulationState::initial(&p, Scheme::Full).unwrap();
        let dx = p.mesh.dx();
        for _ in 0..3 {
            let before_t = state.temperature.clone();
            let before_e = state.energy();
            let dt = 0.02;
            advance_step(&p, Scheme::Full, &mut state, dt).unwrap();
            let after_e = state.energy();
            let mut stored = 0.0;
            for j in 0..dx.len() {
                stored += dx[j]
                    * (p.heat_capacity * (state.temperature[j] - before_t[j]) + after_e[j]
                        - before_e[j]);
            }
            let nj = dx.len();
            let net_in = dt * (state.grey_flux[0] - state.grey_flux[nj]);
            assert!(
                (stored - net_in).abs() < 1e-9 * net_in.abs(),
                "{stored} vs {net_in}"
            );
        }
    }

    #[test]
    fn persisted_count_matches_storage_formula() {
        let p = small_problem();
        let dims = p.storage_dims();
        for scheme in [Scheme::Full, Scheme::PodI { rank: 2 }] {
            let s = SimulationState::initial(&p, scheme).unwrap();
            assert_eq!(s.element_count(), storage_count(scheme, dims));
        }
        let s = SimulationState::initial(&p, Scheme::PodRt { rank: 2 }).unwrap();
        assert_eq!(
            s.element_count(),
            storage_count(Scheme::PodRt { rank: 2 }, dims) + dims.groups * dims.cells
        );
    }

    #[test]
    fn every_step_persists_the_nominal_count() {
        let p = small_problem();
        let scheme = Scheme::PodI { rank: 1 };
        let out = run(&p, scheme).unwrap();
        assert_eq!(out.persisted_counts.len(), p.time.num_steps() + 1);
        assert!(out.persisted_counts.iter().all(|&n| n == out.storage_count));
    }

    #[test]
    fn zero_steps_echo_the_initial_state() {
        let mut p = small_problem();
        p.time = TimeGrid::from_steps(0.0, Vec::new()).unwrap();
        let out = run(&p, Scheme::Full).unwrap();
        assert_eq!(out.snapshots.len(), 1);
        let s = out.final_snapshot();
        assert_eq!(s.time, 0.0);
        assert!(s.temperature.iter().all(|&t| t == p.initial_temperature));
        assert!(out.outer_iterations.is_empty());
    }

    #[test]
    fn full_rank_schemes_match_reference() {
        let p = small_problem();
        let be = run(&p, Scheme::Full).unwrap();
        for scheme in [Scheme::PodI { rank: 4 }, Scheme::PodRt { rank: 4 }] {
            let out = run(&p, scheme).unwrap();
            for (a, b) in out.snapshots.iter().zip(&be.snapshots) {
                for (x, y) in a.temperature.iter().zip(&b.temperature) {
                    assert!(((x - y) / y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let p = small_problem();
        let a = run(&p, Scheme::PodI { rank: 1 }).unwrap();
        let b = run(&p, Scheme::PodI { rank: 1 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wave_heats_the_left_side() {
        let p = small_problem();
        let out = run(&p, Scheme::Full).unwrap();
        let t = &out.final_snapshot().temperature;
        assert!(t[0] > 0.01 && t[0] > t[9]);
        assert!(out.final_snapshot().energy.iter().all(|e| *e > 0.0));
    }
}
