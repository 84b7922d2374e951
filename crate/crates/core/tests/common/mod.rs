//! Property suites of the numerical building blocks, shared by the
//! property tests and the acceptance suite.
//!
//! Each suite drives a proptest runner over its strategy and returns the
//! minimal failing input on failure.

#![allow(dead_code)]

use mlqd::compression::{
    angular_moments, compress_full_intensity, compress_remainder, svd_reduced, Matrix, Scheme,
};
use mlqd::loqd::{
    grey_average, grey_fixed_emission, mloqd_solve, BoundaryClosure, GroupMoments, GroupProblem,
};
use mlqd::quadrature::{AngularQuadrature, SpatialMesh, TimeGrid};
use mlqd::spectral::{
    group_coefficients, group_emission, planck_fraction, GroupStructure, PhysicalConstants,
};
use mlqd::timestepper::{advance_step, run, Problem, SimulationState};
use mlqd::transport::{
    balance_residual, compute_moments, gamma_weight, sweep_group, GroupInflow, SweepInput,
    GAMMA_SERIES_SWITCH,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence, RngAlgorithm, TestRng, TestRunner};

/// How a suite seeds its runner.
#[derive(Debug, Clone, Copy)]
pub enum Seeds {
    /// fresh random cases, replaying failures saved next to this source file
    Random(&'static str),
    /// a fixed stream, identical on every run
    Fixed,
}

pub type SuiteFn = fn(Seeds) -> Result<(), String>;

/// Every suite with its name.
pub const SUITES: [(&str, SuiteFn); 13] = [
    (
        "svd matches an independent oracle",
        svd_matches_independent_oracle,
    ),
    (
        "truncation error is the singular value tail",
        truncation_errors_are_the_singular_value_tail,
    ),
    (
        "Eckart-Young optimality over all subsets",
        eckart_young_over_all_subsets,
    ),
    (
        "P2 remainder has no low moments",
        p2_remainder_has_no_low_moments,
    ),
    (
        "gamma weight range and monotonicity",
        gamma_stays_in_range_and_decreases,
    ),
    (
        "gamma weight limits and series switch",
        gamma_limits_and_switch_continuity,
    ),
    (
        "Planck fractions are additive",
        planck_fractions_are_additive,
    ),
    (
        "group emission sums to the full spectrum",
        group_emission_sums_to_full_spectrum,
    ),
    (
        "sweep balance in every cell",
        sweep_balance_holds_in_every_cell,
    ),
    ("grey system is the group sum", grey_system_is_the_group_sum),
    (
        "group fluxes sum to the grey flux",
        group_fluxes_sum_to_the_grey_flux,
    ),
    (
        "equilibrium survives fifty steps",
        equilibrium_survives_fifty_steps,
    ),
    (
        "each step conserves total energy",
        each_step_conserves_total_energy,
    ),
];

fn runner(cases: u32, seeds: Seeds) -> TestRunner {
    match seeds {
        Seeds::Random(source) => TestRunner::new(Config {
            cases,
            source_file: Some(source),
            failure_persistence: Some(Box::new(FileFailurePersistence::SourceParallel(
                "proptest-regressions",
            ))),
            ..Config::default()
        }),
        Seeds::Fixed => TestRunner::new_with_rng(
            Config {
                cases,
                failure_persistence: None,
                ..Config::default()
            },
            TestRng::deterministic_rng(RngAlgorithm::ChaCha),
        ),
    }
}

fn check<S: Strategy>(
    cases: u32,
    seeds: Seeds,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases, seeds)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |data| Matrix::new(r, c, data).unwrap())
    })
}

fn to_nalgebra(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

fn spectral_norm(a: &Matrix) -> f64 {
    to_nalgebra(a)
        .singular_values()
        .iter()
        .fold(0.0, |m: f64, v| m.max(*v))
}

fn small_problem(cells: usize, groups: Vec<f64>, t_end: f64) -> Problem {
    let mut p = Problem::fleck_cummings();
    p.mesh = SpatialMesh::uniform(0.1 * cells as f64, cells).unwrap();
    p.groups = GroupStructure::new(groups).unwrap();
    p.quadrature = AngularQuadrature::double_gauss(2).unwrap();
    p.time = TimeGrid::uniform(0.0, t_end, 0.02).unwrap();
    p
}

const MANY: u32 = 64;
const FEW: u32 = 6;

pub fn svd_matches_independent_oracle(seeds: Seeds) -> Result<(), String> {
    check(MANY, seeds, matrix_strategy(40, 9), |a| {
        let svd = svd_reduced(&a);
        let d = a.rows().min(a.cols());
        prop_assert_eq!(svd.sigma.len(), d);
        let mut oracle: Vec<f64> = to_nalgebra(&a).singular_values().iter().copied().collect();
        oracle.sort_by(|x, y| y.total_cmp(x));
        let scale = oracle[0].max(f64::MIN_POSITIVE);
        for (s, o) in svd.sigma.iter().zip(&oracle) {
            prop_assert!((s - o).abs() <= 1e-10 * scale, "{} vs {}", s, o);
        }
        for w in svd.sigma.windows(2) {
            prop_assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
        // orthonormal factors and exact reconstruction
        let full = compress_full_intensity(&a, d).unwrap();
        let err = a.minus(&full.reconstruct()).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-12 * a.frobenius_norm().max(f64::MIN_POSITIVE) + 1e-300);
        for (basis, n) in [(&svd.u, a.rows()), (&svd.v, a.cols())] {
            for p in 0..d {
                for q in 0..d {
                    let dot: f64 = (0..n).map(|i| basis.get(i, p) * basis.get(i, q)).sum();
                    let want = if p == q { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() <= 1e-12, "({}, {}) = {}", p, q, dot);
                }
            }
        }
        Ok(())
    })
}

pub fn truncation_errors_are_the_singular_value_tail(seeds: Seeds) -> Result<(), String> {
    check(
        MANY,
        seeds,
        (matrix_strategy(30, 8), 0usize..8),
        |(a, pick)| {
            let svd = svd_reduced(&a);
            let d = svd.sigma.len();
            let rank = 1 + pick % d;
            let approx = compress_full_intensity(&a, rank).unwrap().reconstruct();
            let diff = a.minus(&approx).unwrap();
            let tail: f64 = svd.sigma[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();
            let scale = svd.sigma[0].max(f64::MIN_POSITIVE);
            prop_assert!((diff.frobenius_norm() - tail).abs() <= 1e-10 * scale);
            let next = svd.sigma.get(rank).copied().unwrap_or(0.0);
            prop_assert!((spectral_norm(&diff) - next).abs() <= 1e-10 * scale);
            Ok(())
        },
    )
}

pub fn eckart_young_over_all_subsets(seeds: Seeds) -> Result<(), String> {
    let strategy = (prop::collection::vec(-5.0f64..5.0, 12 * 8), 1usize..8);
    check(MANY, seeds, strategy, |(data, rank)| {
        let a = Matrix::new(12, 8, data).unwrap();
        let svd = svd_reduced(&a);
        let best = a
            .minus(&compress_full_intensity(&a, rank).unwrap().reconstruct())
            .unwrap()
            .frobenius_norm();
        for mask in 0u32..256 {
            if mask.count_ones() as usize != rank {
                continue;
            }
            let mut b = Matrix::zeros(12, 8);
            for l in (0..8).filter(|l| mask & (1 << l) != 0) {
                for i in 0..12 {
                    for j in 0..8 {
                        b.set(
                            i,
                            j,
                            b.get(i, j) + svd.sigma[l] * svd.u.get(i, l) * svd.v.get(j, l),
                        );
                    }
                }
            }
            let other = a.minus(&b).unwrap().frobenius_norm();
            prop_assert!(
                best <= other * (1.0 + 1e-12) + 1e-12,
                "mask {:b}: {} > {}",
                mask,
                best,
                other
            );
        }
        Ok(())
    })
}

pub fn p2_remainder_has_no_low_moments(seeds: Seeds) -> Result<(), String> {
    let strategy = (
        (1usize..20).prop_flat_map(|r| (Just(r), prop::collection::vec(-10.0f64..10.0, r * 8))),
        0usize..9,
    );
    check(MANY, seeds, strategy, |((rows, data), rank)| {
        let quad = AngularQuadrature::double_gauss(4).unwrap();
        let a = Matrix::new(rows, 8, data).unwrap();
        let norm = a.frobenius_norm().max(f64::MIN_POSITIVE);
        let rank = rank.min(rows);
        let pod = compress_remainder(&a, &quad, rank).unwrap();
        let stored = pod.remainder.reconstruct();
        for i in 0..rows {
            for k in 0..3 {
                let m: f64 = (0..8)
                    .map(|m| quad.weights()[m] * quad.mu()[m].powi(k) * stored.get(i, m))
                    .sum();
                prop_assert!(m.abs() <= 1e-12 * norm, "cell {} moment {}: {}", i, k, m);
            }
        }
        // the P2 part alone carries the first three moments of the field
        let full = pod.reconstruct(&quad).unwrap();
        let (got, want) = (
            angular_moments(&full, &quad).unwrap(),
            angular_moments(&a, &quad).unwrap(),
        );
        for i in 0..rows {
            prop_assert!((got.phi[i] - want.phi[i]).abs() <= 1e-12 * norm);
            prop_assert!((got.flux[i] - want.flux[i]).abs() <= 1e-12 * norm);
        }
        if rank == rows.min(8) {
            prop_assert!(a.minus(&full).unwrap().frobenius_norm() <= 1e-12 * norm);
        }
        Ok(())
    })
}

pub fn gamma_stays_in_range_and_decreases(seeds: Seeds) -> Result<(), String> {
    check(MANY, seeds, (-8.0f64..4.0, -8.0f64..4.0), |(x, y)| {
        let (lo, hi) = if x < y {
            (10f64.powf(x), 10f64.powf(y))
        } else {
            (10f64.powf(y), 10f64.powf(x))
        };
        let (g_lo, g_hi) = (gamma_weight(lo).unwrap(), gamma_weight(hi).unwrap());
        prop_assert!(g_lo > 0.0 && g_lo <= 0.5 && g_hi > 0.0 && g_hi <= 0.5);
        prop_assert!(g_hi <= g_lo + 1e-16);
        Ok(())
    })
}

pub fn gamma_limits_and_switch_continuity(_: Seeds) -> Result<(), String> {
    let close = |a: f64, b: f64, what: &str| {
        if (a - b).abs() <= 1e-15 {
            Ok(())
        } else {
            Err(format!("{what}: {a} vs {b}"))
        }
    };
    let gamma = |x: f64| gamma_weight(x).map_err(|e| e.to_string());
    let s = GAMMA_SERIES_SWITCH;
    close(gamma(s * (1.0 - f64::EPSILON))?, gamma(s)?, "series switch")?;
    close(gamma(1.0 - f64::EPSILON)?, gamma(1.0)?, "unit thickness")?;
    close(gamma(1e-300)?, 0.5, "thin limit")?;
    close(gamma(f64::INFINITY)?, 0.0, "opaque limit")?;
    let big = 1e8;
    close(gamma(big)? * big, 1.0, "thick asymptote")?;
    if gamma_weight(0.0).is_ok() || gamma_weight(-1.0).is_ok() || gamma_weight(f64::NAN).is_ok() {
        return Err("non-positive thickness was accepted".into());
    }
    Ok(())
}

pub fn planck_fractions_are_additive(seeds: Seeds) -> Result<(), String> {
    let strategy = (1e-3f64..5.0, 0.0f64..10.0, 1e-3f64..10.0, 1e-3f64..10.0);
    check(MANY, seeds, strategy, |(t, a, w1, w2)| {
        let (b, c) = (a + w1, a + w1 + w2);
        let whole = planck_fraction(t, a, c).unwrap();
        let parts = planck_fraction(t, a, b).unwrap() + planck_fraction(t, b, c).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-10, "{} vs {}", whole, parts);
        Ok(())
    })
}

pub fn group_emission_sums_to_full_spectrum(seeds: Seeds) -> Result<(), String> {
    check(MANY, seeds, 1e-3f64..3.0, |t| {
        let consts = PhysicalConstants::default();
        let b = group_emission(t, &GroupStructure::fleck_cummings_default(), &consts).unwrap();
        let total: f64 = b.iter().sum();
        let want = consts.c * consts.a_rad * t.powi(4) / 2.0;
        prop_assert!((total / want - 1.0).abs() <= 1e-10);
        prop_assert!((planck_fraction(t, 0.0, f64::INFINITY).unwrap() - 1.0).abs() <= 1e-10);
        Ok(())
    })
}

pub fn sweep_balance_holds_in_every_cell(seeds: Seeds) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(1e-3f64..1e4, 6),
        prop::collection::vec(0.0f64..10.0, 6),
        prop::collection::vec(0.0f64..10.0, 6 * 8),
        prop::collection::vec(1e-3f64..1.0, 6),
        1e-4f64..1.0,
        0.0f64..5.0,
        0.0f64..5.0,
    );
    check(
        MANY,
        seeds,
        strategy,
        |(kappa, source, prev, dx, dt, left, right)| {
            let mesh = SpatialMesh::new(dx).unwrap();
            let quad = AngularQuadrature::double_gauss(4).unwrap();
            let inflow = GroupInflow::isotropic(8, left, right);
            let input = SweepInput {
                opacity: &kappa,
                source: &source,
                previous: &prev,
                inflow: &inflow,
                dt,
                c: 29.9792458,
            };
            let field = sweep_group(&mesh, &quad, &input).unwrap();
            prop_assert!(balance_residual(&mesh, &quad, &input, &field) <= 1e-12);
            Ok(())
        },
    )
}

pub fn grey_system_is_the_group_sum(seeds: Seeds) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(0.05f64..1.0, 5),
        0.0f64..2.0,
        0.1f64..1.0,
    );
    check(MANY, seeds, strategy, |(temps, prev_scale, left_t)| {
        let consts = PhysicalConstants::default();
        let mesh = SpatialMesh::uniform(1.0, 5).unwrap();
        let quad = AngularQuadrature::double_gauss(3).unwrap();
        let groups = GroupStructure::new(vec![0.0, 0.3, 1.0, 3.0, f64::INFINITY]).unwrap();
        let (nj, nm, ng, dt) = (5, quad.len(), groups.num_groups(), 0.01);
        let mut opacity = vec![vec![0.0; nj]; ng];
        let mut planck = vec![vec![0.0; nj]; ng];
        for (j, &t) in temps.iter().enumerate() {
            let c = group_coefficients(t, &groups, &consts).unwrap();
            for g in 0..ng {
                opacity[g][j] = c.opacity[g];
                planck[g][j] = c.emission[g];
            }
        }
        let inflow_b = group_emission(left_t, &groups, &consts).unwrap();
        let mut edd = Vec::new();
        let mut closures = Vec::new();
        let mut prev_e = Vec::new();
        let mut prev_f = Vec::new();
        for g in 0..ng {
            let previous: Vec<f64> = (0..nm * nj)
                .map(|k| prev_scale * planck[g][k % nj] * (1.0 + 0.1 * (k / nj) as f64))
                .collect();
            let source: Vec<f64> = opacity[g]
                .iter()
                .zip(&planck[g])
                .map(|(k, b)| k * b)
                .collect();
            let inflow = GroupInflow::isotropic(nm, inflow_b[g], 0.0);
            let input = SweepInput {
                opacity: &opacity[g],
                source: &source,
                previous: &previous,
                inflow: &inflow,
                dt,
                c: consts.c,
            };
            let field = sweep_group(&mesh, &quad, &input).unwrap();
            let m = compute_moments(&field, &quad, consts.c);
            edd.push(m.eddington.clone());
            closures.push((
                BoundaryClosure::from_transport(&m.left),
                BoundaryClosure::from_transport(&m.right),
            ));
            prev_e.push(
                m.phi
                    .iter()
                    .map(|p| 0.5 * prev_scale * p / consts.c)
                    .collect::<Vec<f64>>(),
            );
            prev_f.push(
                m.edge_flux
                    .iter()
                    .map(|f| 0.5 * prev_scale * f)
                    .collect::<Vec<f64>>(),
            );
        }
        let problems: Vec<GroupProblem<'_>> = (0..ng)
            .map(|g| GroupProblem {
                opacity: &opacity[g],
                planck: &planck[g],
                eddington: &edd[g],
                left: closures[g].0,
                right: closures[g].1,
                prev_energy: &prev_e[g],
                prev_flux: &prev_f[g],
            })
            .collect();
        let sols: Vec<_> = problems
            .iter()
            .enumerate()
            .map(|(g, p)| mloqd_solve(&mesh, &consts, dt, g, p).unwrap())
            .collect();
        let moments: Vec<GroupMoments<'_>> = problems
            .iter()
            .zip(&sols)
            .map(|(p, s)| GroupMoments {
                problem: *p,
                solution: s,
            })
            .collect();
        let coeffs = grey_average(&mesh, &moments);
        let sum = |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
            let parts: Vec<Vec<f64>> = (0..ng).map(f).collect();
            (0..parts[0].len())
                .map(|i| parts.iter().map(|p| p[i]).sum())
                .collect()
        };
        let grey_prev_e = sum(&|g| prev_e[g].clone());
        let grey_prev_f = sum(&|g| prev_f[g].clone());
        let grey = grey_fixed_emission(
            &mesh,
            &consts,
            &coeffs,
            &grey_prev_e,
            &grey_prev_f,
            &temps,
            dt,
        )
        .unwrap();
        let e_sum = sum(&|g| sols[g].energy.clone());
        let f_sum = sum(&|g| sols[g].flux.clone());
        let e_scale = e_sum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f_scale = f_sum
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(consts.c * e_scale * 1e-6);
        for (a, b) in grey.energy.iter().zip(&e_sum) {
            prop_assert!((a - b).abs() <= 1e-10 * e_scale, "E {} vs {}", a, b);
        }
        for (a, b) in grey.flux.iter().zip(&f_sum) {
            prop_assert!((a - b).abs() <= 1e-10 * f_scale, "F {} vs {}", a, b);
        }
        Ok(())
    })
}

pub fn group_fluxes_sum_to_the_grey_flux(_: Seeds) -> Result<(), String> {
    let p = small_problem(8, vec![0.0, 0.5, 2.0, f64::INFINITY], 0.1);
    let mut state = SimulationState::initial(&p, Scheme::Full).map_err(|e| e.to_string())?;
    for _ in 0..3 {
        advance_step(&p, Scheme::Full, &mut state, 0.02).map_err(|e| e.to_string())?;
        let scale = state.grey_flux.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for e in 0..state.grey_flux.len() {
            let summed: f64 = state.groups.iter().map(|g| g.flux[e]).sum();
            if (summed - state.grey_flux[e]).abs() > 1e-10 * scale {
                return Err(format!("edge {e}: {summed} vs {}", state.grey_flux[e]));
            }
        }
    }
    Ok(())
}

pub fn equilibrium_survives_fifty_steps(seeds: Seeds) -> Result<(), String> {
    check(FEW, seeds, 0.05f64..1.5, |t| {
        let mut p = small_problem(6, vec![0.0, 0.5, 2.0, f64::INFINITY], 1.0);
        p.initial_temperature = t;
        p.left_temperature = t;
        p.right_temperature = t;
        let out = run(&p, Scheme::PodRt { rank: 1 }).unwrap();
        prop_assert_eq!(out.snapshots.len(), 51);
        let e0 = out.snapshots[0].energy[0];
        for s in &out.snapshots {
            for (&tj, &ej) in s.temperature.iter().zip(&s.energy) {
                prop_assert!((tj / t - 1.0).abs() <= 1e-10, "T drift {}", tj / t - 1.0);
                prop_assert!((ej / e0 - 1.0).abs() <= 1e-10, "E drift {}", ej / e0 - 1.0);
            }
        }
        Ok(())
    })
}

pub fn each_step_conserves_total_energy(seeds: Seeds) -> Result<(), String> {
    check(
        FEW,
        seeds,
        (1e-3f64..0.2, 0.2f64..5.0, 0usize..4),
        |(t0, cv_scale, rank)| {
            let mut p = small_problem(8, vec![0.0, 0.5, 2.0, f64::INFINITY], 0.1);
            p.initial_temperature = t0;
            p.heat_capacity *= cv_scale;
            let scheme = Scheme::PodRt { rank };
            let mut state = SimulationState::initial(&p, scheme).unwrap();
            let dx = p.mesh.dx().to_vec();
            for _ in 0..3 {
                let (t_before, e_before) = (state.temperature.clone(), state.energy());
                advance_step(&p, scheme, &mut state, 0.02).unwrap();
                let e_after = state.energy();
                let stored: f64 = (0..dx.len())
                    .map(|j| {
                        dx[j]
                            * (p.heat_capacity * (state.temperature[j] - t_before[j]) + e_after[j]
                                - e_before[j])
                    })
                    .sum();
                let inflow = 0.02 * (state.grey_flux[0] - state.grey_flux[dx.len()]);
                let total: f64 = (0..dx.len())
                    .map(|j| dx[j] * (p.heat_capacity * state.temperature[j] + e_after[j]))
                    .sum();
                prop_assert!(
                    (stored - inflow).abs() <= 1e-10 * total,
                    "{} vs {}",
                    stored,
                    inflow
                );
            }
            Ok(())
        },
    )
}
