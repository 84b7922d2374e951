//! Relative error norms between solutions and refinement-study tables.

use crate::error::{Error, Result};
use crate::record::{SolutionRecord, Table};
use crate::timestepper::RunOutput;

/// `max_j |a_j - b_j| / max_j |b_j|`, with `reference` as `b`.
pub fn rel_inf_error(a: &[f64], reference: &[f64]) -> Result<f64> {
    if a.len() != reference.len() {
        return Err(Error::GridMismatch(format!(
            "{} values against {} reference values",
            a.len(),
            reference.len()
        )));
    }
    let norm = reference.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(norm > 0.0) {
        return Err(Error::invalid("reference field has zero norm"));
    }
    let diff = a
        .iter()
        .zip(reference)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(diff / norm)
}

/// One entry of [`error_ratio`]. `flagged` marks entries whose value was
/// set by convention rather than computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub flagged: bool,
}

/// Elementwise `numerator / denominator`. A zero over a zero is reported as
/// 1 and a nonzero over an underflowed denominator as infinity; both are
/// flagged.
pub fn error_ratio(numerator: &[f64], denominator: &[f64]) -> Result<Vec<Ratio>> {
    if numerator.len() != denominator.len() {
        return Err(Error::invalid(format!(
            "{} numerators for {} denominators",
            numerator.len(),
            denominator.len()
        )));
    }
    Ok(numerator
        .iter()
        .zip(denominator)
        .map(|(&n, &d)| {
            if d.abs() >= f64::MIN_POSITIVE {
                Ratio {
                    value: n / d,
                    flagged: false,
                }
            } else if n.abs() < f64::MIN_POSITIVE {
                log::info!("0/0 error ratio reported as 1");
                Ratio {
                    value: 1.0,
                    flagged: true,
                }
            } else {
                Ratio {
                    value: f64::INFINITY,
                    flagged: true,
                }
            }
        })
        .collect())
}

/// Errors of both fields at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldErrors {
    pub time: f64,
    pub temperature: f64,
    pub energy: f64,
}

/// Errors of a run against a same-grid reference, at every shared snapshot.
pub fn run_errors(run: &RunOutput, reference: &RunOutput) -> Result<Vec<FieldErrors>> {
    if run.snapshots.len() != reference.snapshots.len() {
        return Err(Error::GridMismatch(format!(
            "{} snapshots against {}",
            run.snapshots.len(),
            reference.snapshots.len()
        )));
    }
    run.snapshots
        .iter()
        .zip(&reference.snapshots)
        .map(|(a, b)| {
            Ok(FieldErrors {
                time: b.time,
                temperature: rel_inf_error(&a.temperature, &b.temperature)?,
                energy: rel_inf_error(&a.energy, &b.energy)?,
            })
        })
        .collect()
}

/// Errors of a record against a reference record on the same grid. Every
/// frame of `record` must have a reference frame at the same time.
pub fn record_errors(
    record: &SolutionRecord,
    reference: &SolutionRecord,
) -> Result<Vec<FieldErrors>> {
    record.check_same_grid(reference)?;
    let tol = 1e-9 * reference.time_step.max(f64::MIN_POSITIVE);
    record
        .frames
        .iter()
        .map(|a| {
            let b = reference
                .frames
                .iter()
                .find(|b| (b.time - a.time).abs() <= tol)
                .ok_or_else(|| {
                    Error::GridMismatch(format!("no reference frame at t = {}", a.time))
                })?;
            Ok(FieldErrors {
                time: a.time,
                temperature: rel_inf_error(&a.temperature, &b.temperature)?,
                energy: rel_inf_error(&a.energy, &b.energy)?,
            })
        })
        .collect()
}

/// Final-time and largest-over-time errors of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub final_temperature: f64,
    pub final_energy: f64,
    pub max_temperature: f64,
    pub max_energy: f64,
}

impl ErrorSummary {
    pub fn of(series: &[FieldErrors]) -> Self {
        let last = series.last().copied().unwrap_or(FieldErrors {
            time: 0.0,
            temperature: 0.0,
            energy: 0.0,
        });
        Self {
            final_temperature: last.temperature,
            final_energy: last.energy,
            max_temperature: series.iter().fold(0.0, |m, e| m.max(e.temperature)),
            max_energy: series.iter().fold(0.0, |m, e| m.max(e.energy)),
        }
    }
}

/// Errors at fixed output times for a sequence of grids, from coarse to
/// fine, and the factor `error_coarse / error_fine` between neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementTable {
    pub times: Vec<f64>,
    /// grid parameter (cell width or time step) of each row
    pub grids: Vec<f64>,
    /// `errors[k][i]` is the error of grid `k` at `times[i]`
    pub errors: Vec<Vec<f64>>,
    /// `ratios[k][i] = errors[k][i] / errors[k + 1][i]`
    pub ratios: Vec<Vec<Ratio>>,
}

impl RefinementTable {
    /// How far the ratio of pair `k` at time index `i` is from one, on a
    /// log scale.
    pub fn distance_from_one(&self, k: usize, i: usize) -> f64 {
        self.ratios[k][i].value.ln().abs()
    }

    pub fn to_table(&self, grid_name: &str) -> Result<Table> {
        let mut columns = vec![grid_name.to_string()];
        for t in &self.times {
            columns.push(format!("error_t{t}"));
        }
        for t in &self.times {
            columns.push(format!("ratio_t{t}"));
        }
        let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut table = Table::new("row", &refs);
        for (k, grid) in self.grids.iter().enumerate() {
            let mut values = vec![*grid];
            values.extend(&self.errors[k]);
            match self.ratios.get(k) {
                Some(r) => values.extend(r.iter().map(|r| r.value)),
                None => values.extend(std::iter::repeat(f64::NAN).take(self.times.len())),
            }
            table.push(k.to_string(), values)?;
        }
        Ok(table)
    }
}

/// Builds a refinement table from `(grid parameter, errors at times)`
/// entries ordered from coarse to fine.
pub fn refinement_table(times: &[f64], entries: &[(f64, Vec<f64>)]) -> Result<RefinementTable> {
    if let Some((grid, e)) = entries.iter().find(|(_, e)| e.len() != times.len()) {
        return Err(Error::invalid(format!(
            "grid {grid} has {} errors for {} output times",
            e.len(),
            times.len()
        )));
    }
    let ratios = entries
        .windows(2)
        .map(|w| error_ratio(&w[0].1, &w[1].1))
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinementTable {
        times: times.to_vec(),
        grids: entries.iter().map(|(g, _)| *g).collect(),
        errors: entries.iter().map(|(_, e)| e.clone()).collect(),
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_fields_have_zero_error() {
        let b = [1.0, -2.0, 0.5];
        assert_eq!(rel_inf_error(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn uniform_scaling_error() {
        let b = [1.0, 2.0, 4.0];
        let a: Vec<f64> = b.iter().map(|v| 1.01 * v).collect();
        assert!((rel_inf_error(&a, &b).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn error_preconditions() {
        assert!(matches!(
            rel_inf_error(&[1.0], &[1.0, 2.0]),
            Err(Error::GridMismatch(_))
        ));
        assert!(rel_inf_error(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn ratio_conventions() {
        let r = error_ratio(&[0.2, 0.0, 1.0, 3.0], &[0.2, 0.0, 0.0, 1.5]).unwrap();
        assert_eq!(
            r[0],
            Ratio {
                value: 1.0,
                flagged: false
            }
        );
        assert_eq!(
            r[1],
            Ratio {
                value: 1.0,
                flagged: true
            }
        );
        assert!(r[2].flagged && r[2].value.is_infinite());
        assert_eq!(r[3].value, 2.0);
    }

    #[test]
    fn constant_errors_give_unit_ratios() {
        let times = [0.4, 1.0, 6.0];
        let entries: Vec<(f64, Vec<f64>)> = [0.24, 0.12, 0.06, 0.03]
            .iter()
            .map(|&h| (h, vec![1e-3; 3]))
            .collect();
        let table = refinement_table(&times, &entries).unwrap();
        assert_eq!(table.ratios.len(), 3);
        for k in 0..3 {
            for i in 0..3 {
                assert_eq!(table.ratios[k][i].value, 1.0);
                assert_eq!(table.distance_from_one(k, i), 0.0);
            }
        }
        let csv = table.to_table("dx").unwrap();
        assert_eq!(csv.rows.len(), 4);
        assert!(csv.rows[3].values[4].is_nan());
    }

    #[test]
    fn refinement_rejects_missing_times() {
        assert!(refinement_table(&[0.4, 1.0], &[(0.1, vec![1.0])]).is_err());
    }

    #[test]
    fn summary_takes_final_and_max() {
        let s = ErrorSummary::of(&[
            FieldErrors {
                time: 0.0,
                temperature: 0.0,
                energy: 0.0,
            },
            FieldErrors {
                time: 1.0,
                temperature: 0.3,
                energy: 0.1,
            },
            FieldErrors {
                time: 2.0,
                temperature: 0.2,
                energy: 0.4,
            },
        ]);
        assert_eq!(s.final_temperature, 0.2);
        assert_eq!(s.max_temperature, 0.3);
        assert_eq!(s.max_energy, 0.4);
    }
}
