//! Low-order quasidiffusion equations.
//!
//! Cell-average energy densities `E_j` and cell-edge fluxes `F_{j+1/2}` are
//! discretized by a finite-volume scheme:
//!
//! ```text
//! balance (cell j):
//!   dx_j/dt (E_j - E_j^old) + F_{j+1/2} - F_{j-1/2} + c k_j dx_j E_j = S_j dx_j
//! momentum (interior edge between j and j+1, h = (dx_j + dx_{j+1})/2):
//!   h/(c dt) (F - F^old) + c (f_{j+1} E_{j+1} - f_j E_j) + h (kf F + eta (E_j + E_{j+1})/2) = 0
//! momentum (boundary half cell, h = dx/2), with the edge energy E_b as an unknown:
//!   h/(c dt) (F - F^old) +- c (f_1 E_1 - f_b E_b) + h (kf F + eta E_b) = 0
//! closure:
//!   F_b = c C_out (E_b - E_in) + F_in
//! ```
//!
//! `C_out` is the outgoing half-range flux-to-density ratio and `E_in`, `F_in`
//! are the incoming partial moments, all taken from the transport solution.
//! Eliminating `F` and the boundary energies leaves a tridiagonal system in
//! `E`. The grey system uses the same stencil with spectrum-averaged
//! coefficients; the group system has `eta = 0`.

use crate::error::{Error, Result};
use crate::quadrature::SpatialMesh;
use crate::spectral::PhysicalConstants;
use crate::transport::BoundaryFactors;
use crate::tridiag::Tridiagonal;

/// Boundary condition data for one edge of a low-order system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryClosure {
    pub c_out: f64,
    pub eddington: f64,
    pub energy_in: f64,
    pub flux_in: f64,
}

impl BoundaryClosure {
    pub fn from_transport(factors: &BoundaryFactors) -> Self {
        Self {
            c_out: factors.c_out,
            eddington: factors.eddington,
            energy_in: factors.energy_in,
            flux_in: factors.flux_in,
        }
    }

    /// Zero net flux through the edge.
    pub fn reflective(eddington: f64) -> Self {
        Self {
            c_out: 0.0,
            eddington,
            energy_in: 0.0,
            flux_in: 0.0,
        }
    }
}

/// One low-order linear system.
#[derive(Debug, Clone, Copy)]
pub struct LoqdSystem<'a> {
    pub mesh: &'a SpatialMesh,
    pub c: f64,
    pub dt: f64,
    /// absorption coefficient `k_j` (the balance carries `c k_j E_j`)
    pub absorption: &'a [f64],
    /// volumetric source `S_j`
    pub emission: &'a [f64],
    /// cell Eddington factors
    pub eddington: &'a [f64],
    /// momentum opacity per edge (`J + 1`)
    pub edge_opacity: &'a [f64],
    /// momentum correction per edge (`J + 1`), zero for group systems
    pub edge_eta: &'a [f64],
    pub prev_energy: &'a [f64],
    pub prev_flux: &'a [f64],
    pub left: BoundaryClosure,
    pub right: BoundaryClosure,
}

/// Solution of a low-order system.
#[derive(Debug, Clone, PartialEq)]
pub struct LoqdSolution {
    pub energy: Vec<f64>,
    pub flux: Vec<f64>,
    pub energy_left: f64,
    pub energy_right: f64,
}

impl LoqdSolution {
    pub fn zeros(cells: usize) -> Self {
        Self {
            energy: vec![0.0; cells],
            flux: vec![0.0; cells + 1],
            energy_left: 0.0,
            energy_right: 0.0,
        }
    }
}

// F_e = p + q E_{e-1} + s E_e
#[derive(Debug, Clone, Copy, Default)]
struct EdgeFlux {
    p: f64,
    q: f64,
    s: f64,
}

struct Eliminated {
    matrix: Tridiagonal,
    edges: Vec<EdgeFlux>,
    // E_b = alpha + beta E_adjacent
    left: (f64, f64),
    right: (f64, f64),
}

impl<'a> LoqdSystem<'a> {
    fn validate(&self) -> Result<()> {
        let nj = self.mesh.num_cells();
        let cell = [
            ("absorption", self.absorption.len()),
            ("emission", self.emission.len()),
            ("eddington", self.eddington.len()),
            ("prev_energy", self.prev_energy.len()),
        ];
        let edge = [
            ("edge_opacity", self.edge_opacity.len()),
            ("edge_eta", self.edge_eta.len()),
            ("prev_flux", self.prev_flux.len()),
        ];
        for (name, len) in cell {
            if len != nj {
                return Err(Error::invalid(format!(
                    "{name} has {len} entries, expected {nj}"
                )));
            }
        }
        for (name, len) in edge {
            if len != nj + 1 {
                return Err(Error::invalid(format!(
                    "{name} has {len} entries, expected {}",
                    nj + 1
                )));
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        Ok(())
    }

    fn inv_cdt(&self) -> f64 {
        1.0 / (self.c * self.dt)
    }

    fn eliminate(&self, context: &str) -> Result<Eliminated> {
        self.validate()?;
        let nj = self.mesh.num_cells();
        let dx = self.mesh.dx();
        let c = self.c;
        let inv_cdt = self.inv_cdt();
        let f = self.eddington;
        let mut edges = vec![EdgeFlux::default(); nj + 1];

        for e in 1..nj {
            let h = 0.5 * (dx[e - 1] + dx[e]);
            let a = h * inv_cdt;
            let k = a + h * self.edge_opacity[e];
            if !(k.abs() > 0.0) {
                return Err(Error::SingularSystem {
                    context: format!("{context}: momentum at edge {e}"),
                    row: e,
                    pivot: k,
                });
            }
            let eta = 0.5 * h * self.edge_eta[e];
            edges[e] = EdgeFlux {
                p: a * self.prev_flux[e] / k,
                q: (c * f[e - 1] - eta) / k,
                s: -(c * f[e] + eta) / k,
            };
        }

        let boundary_singular = |side: &str, den: f64| Error::SingularSystem {
            context: format!("{context}: {side} boundary closure"),
            row: 0,
            pivot: den,
        };

        // left half cell
        let bl = self.left;
        let h = 0.5 * dx[0];
        let a = h * inv_cdt;
        let k = a + h * self.edge_opacity[0];
        let eta = h * self.edge_eta[0];
        let den = c * (k * bl.c_out - bl.eddington) + eta;
        if !(den.abs() > 1e-300) || !den.is_finite() {
            return Err(boundary_singular("left", den));
        }
        let alpha = (a * self.prev_flux[0] + k * (c * bl.c_out * bl.energy_in - bl.flux_in)) / den;
        let beta = -c * f[0] / den;
        edges[0] = EdgeFlux {
            p: c * bl.c_out * (alpha - bl.energy_in) + bl.flux_in,
            q: 0.0,
            s: c * bl.c_out * beta,
        };
        let left = (alpha, beta);

        // right half cell
        let br = self.right;
        let h = 0.5 * dx[nj - 1];
        let a = h * inv_cdt;
        let k = a + h * self.edge_opacity[nj];
        let eta = h * self.edge_eta[nj];
        let den = c * (k * br.c_out + br.eddington) + eta;
        if !(den.abs() > 1e-300) || !den.is_finite() {
            return Err(boundary_singular("right", den));
        }
        let alpha = (a * self.prev_flux[nj] - k * (br.flux_in - c * br.c_out * br.energy_in)) / den;
        let beta = c * f[nj - 1] / den;
        edges[nj] = EdgeFlux {
            p: c * br.c_out * (alpha - br.energy_in) + br.flux_in,
            q: c * br.c_out * beta,
            s: 0.0,
        };
        let right = (alpha, beta);

        let mut matrix = Tridiagonal::zeros(nj);
        for j in 0..nj {
            let time = dx[j] / self.dt;
            matrix.lower[j] = -edges[j].q;
            matrix.diag[j] = time + c * self.absorption[j] * dx[j] + edges[j + 1].q - edges[j].s;
            matrix.upper[j] = edges[j + 1].s;
            matrix.rhs[j] =
                self.emission[j] * dx[j] + time * self.prev_energy[j] - edges[j + 1].p + edges[j].p;
        }
        Ok(Eliminated {
            matrix,
            edges,
            left,
            right,
        })
    }

    /// The tridiagonal system in `E` after eliminating fluxes and boundary
    /// energies.
    pub fn tridiagonal(&self) -> Result<Tridiagonal> {
        Ok(self.eliminate("low-order")?.matrix)
    }

    pub fn solve(&self, context: &str) -> Result<LoqdSolution> {
        let el = self.eliminate(context)?;
        let energy = el.matrix.solve(context)?;
        let nj = energy.len();
        let flux: Vec<f64> = el
            .edges
            .iter()
            .enumerate()
            .map(|(e, ef)| {
                let below = if e > 0 { energy[e - 1] } else { 0.0 };
                let above = if e < nj { energy[e] } else { 0.0 };
                ef.p + ef.q * below + ef.s * above
            })
            .collect();
        Ok(LoqdSolution {
            energy_left: el.left.0 + el.left.1 * energy[0],
            energy_right: el.right.0 + el.right.1 * energy[nj - 1],
            energy,
            flux,
        })
    }

    /// Largest relative residual of the un-eliminated equations (balance,
    /// momentum, closures), each scaled by the sum of its term magnitudes.
    pub fn residual(&self, sol: &LoqdSolution) -> f64 {
        let nj = self.mesh.num_cells();
        let dx = self.mesh.dx();
        let c = self.c;
        let inv_cdt = self.inv_cdt();
        let f = self.eddington;
        let (e, fl) = (&sol.energy, &sol.flux);
        let rel = |terms: &[f64]| {
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            if scale == 0.0 {
                0.0
            } else {
                terms.iter().sum::<f64>().abs() / scale
            }
        };
        let mut worst: f64 = 0.0;
        for j in 0..nj {
            let t = dx[j] / self.dt;
            worst = worst.max(rel(&[
                t * e[j],
                -t * self.prev_energy[j],
                fl[j + 1],
                -fl[j],
                c * self.absorption[j] * dx[j] * e[j],
                -self.emission[j] * dx[j],
            ]));
        }
        for k in 1..nj {
            let h = 0.5 * (dx[k - 1] + dx[k]);
            worst = worst.max(rel(&[
                h * inv_cdt * fl[k],
                -h * inv_cdt * self.prev_flux[k],
                c * f[k] * e[k],
                -c * f[k - 1] * e[k - 1],
                h * self.edge_opacity[k] * fl[k],
                0.5 * h * self.edge_eta[k] * (e[k - 1] + e[k]),
            ]));
        }
        let (bl, br) = (self.left, self.right);
        let h = 0.5 * dx[0];
        worst = worst.max(rel(&[
            h * inv_cdt * fl[0],
            -h * inv_cdt * self.prev_flux[0],
            c * f[0] * e[0],
            -c * bl.eddington * sol.energy_left,
            h * self.edge_opacity[0] * fl[0],
            h * self.edge_eta[0] * sol.energy_left,
        ]));
        worst = worst.max(rel(&[
            fl[0],
            -c * bl.c_out * sol.energy_left,
            c * bl.c_out * bl.energy_in,
            -bl.flux_in,
        ]));
        let h = 0.5 * dx[nj - 1];
        worst = worst.max(rel(&[
            h * inv_cdt * fl[nj],
            -h * inv_cdt * self.prev_flux[nj],
            c * br.eddington * sol.energy_right,
            -c * f[nj - 1] * e[nj - 1],
            h * self.edge_opacity[nj] * fl[nj],
            h * self.edge_eta[nj] * sol.energy_right,
        ]));
        worst = worst.max(rel(&[
            fl[nj],
            -c * br.c_out * sol.energy_right,
            c * br.c_out * br.energy_in,
            -br.flux_in,
        ]));
        worst
    }
}

/// Momentum opacity at edges: the `dx`-weighted mean of the adjacent cells in
/// the interior and the boundary cell's value at the two ends.
pub fn edge_opacity(mesh: &SpatialMesh, kappa: &[f64]) -> Vec<f64> {
    let dx = mesh.dx();
    let nj = dx.len();
    let mut out = Vec::with_capacity(nj + 1);
    out.push(kappa[0]);
    for e in 1..nj {
        out.push((kappa[e - 1] * dx[e - 1] + kappa[e] * dx[e]) / (dx[e - 1] + dx[e]));
    }
    out.push(kappa[nj - 1]);
    out
}

/// Inputs of one group's low-order solve.
#[derive(Debug, Clone, Copy)]
pub struct GroupProblem<'a> {
    pub opacity: &'a [f64],
    /// `B_g` per cell
    pub planck: &'a [f64],
    pub eddington: &'a [f64],
    pub left: BoundaryClosure,
    pub right: BoundaryClosure,
    pub prev_energy: &'a [f64],
    pub prev_flux: &'a [f64],
}

/// Multigroup low-order solve for a single group.
pub fn mloqd_solve(
    mesh: &SpatialMesh,
    consts: &PhysicalConstants,
    dt: f64,
    group: usize,
    problem: &GroupProblem<'_>,
) -> Result<LoqdSolution> {
    let emission: Vec<f64> = problem
        .opacity
        .iter()
        .zip(problem.planck)
        .map(|(k, b)| 2.0 * k * b)
        .collect();
    let edge_kappa = edge_opacity(mesh, problem.opacity);
    let eta = vec![0.0; mesh.num_cells() + 1];
    LoqdSystem {
        mesh,
        c: consts.c,
        dt,
        absorption: problem.opacity,
        emission: &emission,
        eddington: problem.eddington,
        edge_opacity: &edge_kappa,
        edge_eta: &eta,
        prev_energy: problem.prev_energy,
        prev_flux: problem.prev_flux,
        left: problem.left,
        right: problem.right,
    }
    .solve(&format!("group {group} low-order"))
}

/// A group's converged low-order data as seen by the grey averaging.
#[derive(Debug, Clone, Copy)]
pub struct GroupMoments<'a> {
    pub problem: GroupProblem<'a>,
    pub solution: &'a LoqdSolution,
}

/// Spectrum-averaged coefficients of the grey system.
#[derive(Debug, Clone, PartialEq)]
pub struct GreyCoefficients {
    /// E-weighted opacity per cell
    pub kappa_e: Vec<f64>,
    /// B-weighted opacity per cell
    pub kappa_b: Vec<f64>,
    /// E-weighted Eddington factor per cell
    pub eddington: Vec<f64>,
    /// |F|-weighted momentum opacity per edge
    pub kappa_f: Vec<f64>,
    /// momentum correction per edge
    pub eta: Vec<f64>,
    pub left: BoundaryClosure,
    pub right: BoundaryClosure,
    /// number of averages that fell back to an unweighted mean
    pub fallbacks: usize,
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)> + Clone, fallbacks: &mut usize) -> f64 {
    let (num, den) = values
        .clone()
        .fold((0.0, 0.0), |(n, d), (v, w)| (n + v * w, d + w));
    if den.abs() > 1e-300 && num.is_finite() {
        num / den
    } else {
        *fallbacks += 1;
        let (sum, count) = values.fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        sum / count.max(1) as f64
    }
}

/// Spectral averages that make the grey equations the exact group sum of the
/// multigroup equations.
pub fn grey_average(mesh: &SpatialMesh, groups: &[GroupMoments<'_>]) -> GreyCoefficients {
    let nj = mesh.num_cells();
    let mut fallbacks = 0;
    let edge_kappa: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| edge_opacity(mesh, g.problem.opacity))
        .collect();

    let mut kappa_e = Vec::with_capacity(nj);
    let mut kappa_b = Vec::with_capacity(nj);
    let mut eddington = Vec::with_capacity(nj);
    for j in 0..nj {
        let by_energy = groups
            .iter()
            .map(|g| (g.problem.opacity[j], g.solution.energy[j]));
        kappa_e.push(weighted_mean(by_energy, &mut fallbacks));
        let by_planck = groups
            .iter()
            .map(|g| (g.problem.opacity[j], g.problem.planck[j]));
        kappa_b.push(weighted_mean(by_planck, &mut fallbacks));
        let f = groups
            .iter()
            .map(|g| (g.problem.eddington[j], g.solution.energy[j]));
        eddington.push(weighted_mean(f, &mut fallbacks));
    }

    let mut kappa_f = Vec::with_capacity(nj + 1);
    let mut eta = Vec::with_capacity(nj + 1);
    for e in 0..=nj {
        let kf = weighted_mean(
            groups
                .iter()
                .zip(&edge_kappa)
                .map(|(g, k)| (k[e], g.solution.flux[e].abs())),
            &mut fallbacks,
        );
        let edge_energy: f64 = groups
            .iter()
            .map(|g| {
                let s = g.solution;
                if e == 0 {
                    s.energy_left
                } else if e == nj {
                    s.energy_right
                } else {
                    0.5 * (s.energy[e - 1] + s.energy[e])
                }
            })
            .sum();
        let excess: f64 = groups
            .iter()
            .zip(&edge_kappa)
            .map(|(g, k)| (k[e] - kf) * g.solution.flux[e])
            .sum();
        let eta_e = if edge_energy.abs() > 1e-300 {
            excess / edge_energy
        } else {
            fallbacks += 1;
            0.0
        };
        kappa_f.push(kf);
        eta.push(eta_e);
    }

    let boundary = |left: bool, fallbacks: &mut usize| {
        let pick = |g: &GroupMoments<'_>| {
            if left {
                (g.problem.left, g.solution.energy_left)
            } else {
                (g.problem.right, g.solution.energy_right)
            }
        };
        let f = weighted_mean(
            groups.iter().map(|g| {
                let (b, e) = pick(g);
                (b.eddington, e)
            }),
            fallbacks,
        );
        let c_out = weighted_mean(
            groups.iter().map(|g| {
                let (b, e) = pick(g);
                (b.c_out, e - b.energy_in)
            }),
            fallbacks,
        );
        BoundaryClosure {
            c_out,
            eddington: f,
            energy_in: groups.iter().map(|g| pick(g).0.energy_in).sum(),
            flux_in: groups.iter().map(|g| pick(g).0.flux_in).sum(),
        }
    };
    let left = boundary(true, &mut fallbacks);
    let right = boundary(false, &mut fallbacks);

    GreyCoefficients {
        kappa_e,
        kappa_b,
        eddington,
        kappa_f,
        eta,
        left,
        right,
        fallbacks,
    }
}

/// Previous-step grey data.
#[derive(Debug, Clone, Copy)]
pub struct GreyPrevious<'a> {
    pub energy: &'a [f64],
    pub flux: &'a [f64],
    pub temperature: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-13,
            max_iterations: 100,
        }
    }
}

/// Grey low-order solution coupled to the material temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct GreySolution {
    pub radiation: LoqdSolution,
    pub temperature: Vec<f64>,
    pub iterations: usize,
}

/// Grey system with the emission `c kappa_B a_R T^4` held fixed.
pub fn grey_fixed_emission(
    mesh: &SpatialMesh,
    consts: &PhysicalConstants,
    coeffs: &GreyCoefficients,
    prev_energy: &[f64],
    prev_flux: &[f64],
    temperature: &[f64],
    dt: f64,
) -> Result<LoqdSolution> {
    let emission: Vec<f64> = coeffs
        .kappa_b
        .iter()
        .zip(temperature)
        .map(|(k, t)| consts.c * k * consts.a_rad * t.powi(4))
        .collect();
    LoqdSystem {
        mesh,
        c: consts.c,
        dt,
        absorption: &coeffs.kappa_e,
        emission: &emission,
        eddington: &coeffs.eddington,
        edge_opacity: &coeffs.kappa_f,
        edge_eta: &coeffs.eta,
        prev_energy,
        prev_flux,
        left: coeffs.left,
        right: coeffs.right,
    }
    .solve("grey low-order")
}

/// Relative Newton steps below this are taken in full without a merit check.
const QUADRATIC_REGIME: f64 = 1e-6;
/// Smallest fraction of a Newton step tried by the line search.
const MIN_STEP_FRACTION: f64 = 1e-10;

/// Grey low-order equations coupled to the material energy balance
/// `cv (T - T_old)/dt = c (kappa_E E - kappa_B a_R T^4)`.
///
/// Newton on `T^4`: each iteration linearizes the emission about the current
/// temperature, eliminates `T` cell by cell, solves the grey system for `E`
/// and updates `T`. Steps are accepted when they reduce the material-balance
/// residual (with `E` from the grey system at fixed emission); otherwise
/// they are halved.
#[allow(clippy::too_many_arguments)]
pub fn grey_meb_solve(
    mesh: &SpatialMesh,
    consts: &PhysicalConstants,
    heat_capacity: f64,
    coeffs: &GreyCoefficients,
    prev: &GreyPrevious<'_>,
    guess: &[f64],
    dt: f64,
    options: &NewtonOptions,
) -> Result<GreySolution> {
    let nj = mesh.num_cells();
    if guess.len() != nj || prev.temperature.len() != nj {
        return Err(Error::invalid(
            "temperature arrays must have one entry per cell",
        ));
    }
    if guess.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("temperature guess must be positive"));
    }
    let (c, a) = (consts.c, consts.a_rad);
    let cv_dt = heat_capacity / dt;
    // material-balance residual in temperature units
    let merit = |t: &[f64]| -> Result<f64> {
        let e = grey_fixed_emission(mesh, consts, coeffs, prev.energy, prev.flux, t, dt)?.energy;
        Ok((0..nj)
            .map(|j| {
                let r = (t[j] - prev.temperature[j])
                    - c * (coeffs.kappa_e[j] * e[j] - coeffs.kappa_b[j] * a * t[j].powi(4)) / cv_dt;
                r * r
            })
            .sum::<f64>()
            .sqrt())
    };
    let mut t_k = guess.to_vec();
    let mut merit_k: Option<f64> = None;
    let mut absorption = vec![0.0; nj];
    let mut emission = vec![0.0; nj];
    let mut history = Vec::new();
    for it in 1..=options.max_iterations {
        let mut denom = vec![0.0; nj];
        for j in 0..nj {
            let t3 = t_k[j] * t_k[j] * t_k[j];
            let slope = 4.0 * c * coeffs.kappa_b[j] * a * t3;
            let x = c * coeffs.kappa_b[j] * a * t3 * t_k[j];
            denom[j] = cv_dt + slope;
            let beta = slope / denom[j];
            absorption[j] = coeffs.kappa_e[j] * (1.0 - beta);
            emission[j] = -3.0 * x * (1.0 - beta) + beta * cv_dt * prev.temperature[j];
        }
        let radiation = LoqdSystem {
            mesh,
            c,
            dt,
            absorption: &absorption,
            emission: &emission,
            eddington: &coeffs.eddington,
            edge_opacity: &coeffs.kappa_f,
            edge_eta: &coeffs.eta,
            prev_energy: prev.energy,
            prev_flux: prev.flux,
            left: coeffs.left,
            right: coeffs.right,
        }
        .solve("grey low-order")?;

        let mut step = vec![0.0; nj];
        let mut change: f64 = 0.0;
        for j in 0..nj {
            let x = c * coeffs.kappa_b[j] * a * t_k[j].powi(4);
            let t = (cv_dt * prev.temperature[j]
                + c * coeffs.kappa_e[j] * radiation.energy[j]
                + 3.0 * x)
                / denom[j];
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("temperature in cell {j}")));
            }
            step[j] = t - t_k[j];
            change = change.max((step[j] / t).abs());
        }
        if change < options.tolerance && t_k.iter().zip(&step).all(|(t, d)| t + d > 0.0) {
            history.push(change);
            for (t, d) in t_k.iter_mut().zip(&step) {
                *t += d;
            }
            return Ok(GreySolution {
                radiation,
                temperature: t_k,
                iterations: it,
            });
        }

        let full_positive = t_k.iter().zip(&step).all(|(t, d)| t + d > 0.0);
        if full_positive && change < QUADRATIC_REGIME {
            history.push(change);
            for (t, d) in t_k.iter_mut().zip(&step) {
                *t += d;
            }
            merit_k = None;
            continue;
        }
        let current = match merit_k {
            Some(m) => m,
            None => merit(&t_k)?,
        };
        let mut lambda = 1.0;
        let (trial, trial_merit) = loop {
            let trial: Vec<f64> = t_k.iter().zip(&step).map(|(t, d)| t + lambda * d).collect();
            if trial.iter().all(|t| *t > 0.0) {
                let m = merit(&trial)?;
                if m <= (1.0 - 1e-4 * lambda) * current {
                    break (trial, m);
                }
            }
            lambda *= 0.5;
            if lambda < MIN_STEP_FRACTION {
                return Err(Error::NotConverged {
                    what: "grey/MEB Newton line search".to_string(),
                    iterations: it,
                    last_change: change,
                    history,
                });
            }
        };
        if lambda < 1.0 {
            log::debug!("grey Newton iteration {it}: step scaled by {lambda:e}");
        }
        let change = trial
            .iter()
            .zip(&t_k)
            .fold(0.0f64, |m, (n, o)| m.max((n - o).abs() / n));
        history.push(change);
        t_k = trial;
        merit_k = Some(trial_merit);
    }
    Err(Error::NotConverged {
        what: "grey/MEB Newton".to_string(),
        iterations: options.max_iterations,
        last_change: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
