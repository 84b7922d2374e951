//! Command-line front end: argument types and the four subcommands.
//!
//! Each `cmd_*` function is usable as a library call; the binary only parses
//! arguments, configures the thread pool and maps errors to exit codes with
//! [`exit_code`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compression::{reduction_percent, storage_count, Scheme, StorageDims};
use crate::config::{check_rank, load_config, RunConfig, FC_TEST_CONFIG};
use crate::error::{Error, Result};
use crate::metrics::{error_ratio, record_errors, ErrorSummary, FieldErrors};
use crate::record::{SolutionRecord, Table};
use crate::timestepper::{run, Problem, RunOutput};

/// Exit status for a failed command: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mlqd",
    version,
    about = "Multilevel quasidiffusion thermal radiative transfer in a slab"
)]
pub struct Cli {
    /// worker threads for the per-group work (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its solution record and diagnostics.
    Run(RunArgs),
    /// Relative errors of solution records against a reference record.
    Compare(CompareArgs),
    /// Storage of the previous-step data per scheme and rank.
    Memtable(MemtableArgs),
    /// Run every rank of the POD schemes and tabulate errors against the
    /// full-storage reference.
    SweepRanks(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Be,
    PodI,
    PodRt,
}

impl SchemeKind {
    fn with_rank(self, rank: usize) -> Scheme {
        match self {
            SchemeKind::Be => Scheme::Full,
            SchemeKind::PodI => Scheme::PodI { rank },
            SchemeKind::PodRt => Scheme::PodRt { rank },
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// configuration file (default: the bundled Fleck-Cummings setup)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// storage scheme (default: the configured one)
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,
    /// POD rank, at most min(J, M) (default: the configured one)
    #[arg(long)]
    pub rank: Option<usize>,
    /// output directory (default: the configured one)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// reference solution record
    #[arg(long)]
    pub reference: PathBuf,
    /// solution records to compare
    #[arg(required = true)]
    pub records: Vec<PathBuf>,
    /// directory for the error tables
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MemtableArgs {
    /// take the grid from this configuration instead of the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// spatial cells J
    #[arg(long, default_value_t = 100)]
    pub cells: usize,
    /// discrete directions M
    #[arg(long, default_value_t = 8)]
    pub dirs: usize,
    /// frequency groups G
    #[arg(long, default_value_t = 17)]
    pub groups: usize,
    /// write `memtable.csv` here instead of printing
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// configuration file (default: the bundled Fleck-Cummings setup)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// POD scheme to sweep (default: both)
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,
    /// highest rank (default: d = min(J, M))
    #[arg(long)]
    pub rank: Option<usize>,
    /// reference record holding every time step; computed when absent
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// output directory (default: the configured one)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs the parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = config_or_default(args.config.as_deref())?;
            if let Some(kind) = args.scheme {
                let rank = args.rank.or(cfg.scheme.rank());
                let scheme = match (kind, rank) {
                    (SchemeKind::Be, _) => Scheme::Full,
                    (k, Some(r)) => k.with_rank(r),
                    (_, None) => {
                        return Err(Error::ConfigInvalid(
                            "--rank is required for POD schemes".into(),
                        ))
                    }
                };
                cfg = cfg.with_scheme(scheme)?;
            } else if let Some(rank) = args.rank {
                let scheme = match cfg.scheme {
                    Scheme::Full => {
                        return Err(Error::ConfigInvalid(
                            "--rank needs a POD scheme (--scheme)".into(),
                        ))
                    }
                    Scheme::PodI { .. } => Scheme::PodI { rank },
                    Scheme::PodRt { .. } => Scheme::PodRt { rank },
                };
                cfg = cfg.with_scheme(scheme)?;
            }
            let out = args.out.unwrap_or_else(|| cfg.output.directory.clone());
            let summary = cmd_run(&cfg, &out)?;
            println!(
                "{}: {} steps in {:.2} s, outer iterations max {}, record {}",
                cfg.scheme.label(),
                summary.output.outer_iterations.len(),
                summary.seconds,
                summary
                    .output
                    .outer_iterations
                    .iter()
                    .max()
                    .copied()
                    .unwrap_or(0),
                summary.record_path.display()
            );
            Ok(())
        }
        Command::Compare(args) => {
            let reference = SolutionRecord::load(&args.reference)?;
            let records = args
                .records
                .iter()
                .map(|p| SolutionRecord::load(p))
                .collect::<Result<Vec<_>>>()?;
            let table = cmd_compare(&records, &reference)?;
            let path = args.out.join("errors.csv");
            table.errors.save(&path)?;
            table.summary.save(&args.out.join("error_summary.csv"))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Memtable(args) => {
            let dims = match &args.config {
                Some(path) => {
                    let cfg = load_config(path)?;
                    StorageDims {
                        cells: cfg.grid.cells,
                        dirs: cfg.directions(),
                        groups: cfg.grid.group_edges.len() - 1,
                    }
                }
                None => StorageDims {
                    cells: args.cells,
                    dirs: args.dirs,
                    groups: args.groups,
                },
            };
            let table = cmd_memtable(dims)?;
            match args.out {
                Some(dir) => {
                    let path = dir.join("memtable.csv");
                    table.save(&path)?;
                    println!("wrote {}", path.display());
                }
                None => table.write_csv(std::io::stdout())?,
            }
            Ok(())
        }
        Command::SweepRanks(args) => {
            let cfg = config_or_default(args.config.as_deref())?;
            let kinds = match args.scheme {
                None => vec![SchemeKind::PodI, SchemeKind::PodRt],
                Some(SchemeKind::Be) => {
                    return Err(Error::ConfigInvalid(
                        "sweep-ranks needs a POD scheme".into(),
                    ))
                }
                Some(k) => vec![k],
            };
            let max_rank = args.rank.unwrap_or(cfg.max_rank());
            let reference = args
                .reference
                .as_deref()
                .map(SolutionRecord::load)
                .transpose()?;
            let out = args.out.unwrap_or_else(|| cfg.output.directory.clone());
            let sweep = cmd_sweep_ranks(&cfg, &kinds, max_rank, reference, &out)?;
            println!(
                "swept {} runs, tables in {}",
                sweep.summary.rows.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn config_or_default(path: Option<&Path>) -> Result<RunConfig> {
    load_config(path.unwrap_or(Path::new(FC_TEST_CONFIG)))
}

/// Outcome of [`cmd_run`].
#[derive(Debug)]
pub struct RunSummary {
    pub problem: Problem,
    pub output: RunOutput,
    pub record: SolutionRecord,
    pub record_path: PathBuf,
    pub diagnostics_path: PathBuf,
    pub seconds: f64,
}

/// Runs the configured simulation and writes `<label>.record` and
/// `<label>_diagnostics.csv` into `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let problem = cfg.build_problem()?;
    let start = Instant::now();
    let output = run(&problem, cfg.scheme)?;
    let seconds = start.elapsed().as_secs_f64();
    let record =
        SolutionRecord::from_run(&problem, &output, cfg.output.times.as_deref(), cfg.echo());
    let label = cfg.scheme.label();
    let record_path = out.join(format!("{label}.record"));
    record.save(&record_path)?;

    let mut diag = Table::new("step", &["time", "outer_iterations", "inner_iterations"]);
    for (n, (outer, inner)) in output
        .outer_iterations
        .iter()
        .zip(&output.inner_iterations)
        .enumerate()
    {
        diag.push(
            (n + 1).to_string(),
            vec![output.snapshots[n + 1].time, *outer as f64, *inner as f64],
        )?;
    }
    let diagnostics_path = out.join(format!("{label}_diagnostics.csv"));
    diag.save(&diagnostics_path)?;
    Ok(RunSummary {
        problem,
        output,
        record,
        record_path,
        diagnostics_path,
        seconds,
    })
}

/// Error tables produced by [`cmd_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// one row per record and output time
    pub errors: Table,
    /// one row per record: final-time and largest errors
    pub summary: Table,
}

fn record_label(r: &SolutionRecord) -> String {
    if r.scheme == "be" {
        r.scheme.clone()
    } else {
        format!("{}-r{}", r.scheme, r.rank)
    }
}

/// Relative infinity-norm errors of each record against `reference`.
pub fn cmd_compare(records: &[SolutionRecord], reference: &SolutionRecord) -> Result<Comparison> {
    let mut errors = Table::new(
        "run",
        &["rank", "time", "temperature_error", "energy_error"],
    );
    let mut summary = Table::new(
        "run",
        &[
            "rank",
            "final_temperature_error",
            "final_energy_error",
            "max_temperature_error",
            "max_energy_error",
        ],
    );
    for rec in records {
        let series = record_errors(rec, reference)?;
        push_series(
            &mut errors,
            &mut summary,
            &record_label(rec),
            rec.rank,
            &series,
        )?;
    }
    Ok(Comparison { errors, summary })
}

fn push_series(
    errors: &mut Table,
    summary: &mut Table,
    label: &str,
    rank: usize,
    series: &[FieldErrors],
) -> Result<()> {
    for e in series {
        errors.push(label, vec![rank as f64, e.time, e.temperature, e.energy])?;
    }
    let s = ErrorSummary::of(series);
    summary.push(
        label,
        vec![
            rank as f64,
            s.final_temperature,
            s.final_energy,
            s.max_temperature,
            s.max_energy,
        ],
    )
}

/// Storage table: the full scheme, then POD-I and POD-RT at ranks
/// `1..=min(J, M) - 1`, then POD-RT counting its stored Eddington factors.
pub fn cmd_memtable(dims: StorageDims) -> Result<Table> {
    let full = storage_count(Scheme::Full, dims);
    let d = dims.cells.min(dims.dirs);
    let mut table = Table::new("scheme", &["rank", "elements", "reduction_percent"]);
    table.push("be", vec![0.0, full as f64, 0.0])?;
    for kind in [SchemeKind::PodI, SchemeKind::PodRt] {
        for r in 1..d {
            let scheme = kind.with_rank(r);
            let n = storage_count(scheme, dims);
            table.push(
                scheme.name(),
                vec![r as f64, n as f64, reduction_percent(n, full)],
            )?;
        }
    }
    for r in 1..d {
        let n = storage_count(Scheme::PodRt { rank: r }, dims) + dims.groups * dims.cells;
        table.push(
            "pod-rt+f",
            vec![r as f64, n as f64, reduction_percent(n, full)],
        )?;
    }
    Ok(table)
}

/// Outcome of [`cmd_sweep_ranks`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub errors: Table,
    pub summary: Table,
    /// POD-RT over POD-I final-time temperature errors, when both ran
    pub ratios: Option<Table>,
}

/// Runs each scheme kind at ranks `1..=max_rank` and compares against the
/// full-storage reference, which is computed unless supplied.
pub fn cmd_sweep_ranks(
    cfg: &RunConfig,
    kinds: &[SchemeKind],
    max_rank: usize,
    reference: Option<SolutionRecord>,
    out: &Path,
) -> Result<Sweep> {
    let problem = cfg.build_problem()?;
    let reference = match reference {
        Some(r) => r,
        None => {
            let be = run(&problem, Scheme::Full)?;
            let rec = SolutionRecord::from_run(&problem, &be, None, cfg.echo());
            rec.save(&out.join("be.record"))?;
            rec
        }
    };
    let times: Vec<f64> = reference.frames.iter().map(|f| f.time).collect();
    let mut errors = Table::new(
        "run",
        &["rank", "time", "temperature_error", "energy_error"],
    );
    let mut summary = Table::new(
        "run",
        &[
            "rank",
            "final_temperature_error",
            "final_energy_error",
            "max_temperature_error",
            "max_energy_error",
        ],
    );
    let mut finals: Vec<(SchemeKind, Vec<f64>)> = Vec::new();
    for &kind in kinds {
        let mut per_rank = Vec::new();
        for r in 1..=max_rank {
            let scheme = kind.with_rank(r);
            check_rank(scheme, problem.mesh.num_cells(), problem.quadrature.len())?;
            let output = run(&problem, scheme)?;
            let rec = SolutionRecord::from_run(&problem, &output, Some(&times), cfg.echo());
            rec.save(&out.join(format!("{}.record", scheme.label())))?;
            let series = record_errors(&rec, &reference)?;
            log::info!(
                "{}: final T error {:.3e}",
                scheme.label(),
                ErrorSummary::of(&series).final_temperature
            );
            push_series(&mut errors, &mut summary, &scheme.label(), r, &series)?;
            per_rank.push(ErrorSummary::of(&series).final_temperature);
        }
        finals.push((kind, per_rank));
    }
    let pod_i = finals.iter().find(|(k, _)| *k == SchemeKind::PodI);
    let pod_rt = finals.iter().find(|(k, _)| *k == SchemeKind::PodRt);
    let ratios = match (pod_i, pod_rt) {
        (Some((_, i)), Some((_, rt))) => {
            let mut t = Table::new("rank", &["ratio", "flagged"]);
            for (r, ratio) in error_ratio(rt, i)?.into_iter().enumerate() {
                t.push(
                    (r + 1).to_string(),
                    vec![ratio.value, f64::from(u8::from(ratio.flagged))],
                )?;
            }
            t.save(&out.join("ratio_pod_rt_over_pod_i.csv"))?;
            Some(t)
        }
        _ => None,
    };
    errors.save(&out.join("sweep_errors.csv"))?;
    summary.save(&out.join("sweep_summary.csv"))?;
    Ok(Sweep {
        errors,
        summary,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_POD_I: [f64; 7] = [68.2, 57.5, 46.7, 35.9, 25.2, 14.4, 3.7];
    const TABLE_POD_RT: [f64; 7] = [48.5, 37.7, 27.0, 16.2, 5.4, -5.3, -16.1];

    #[test]
    fn memtable_matches_published_reductions() {
        let t = cmd_memtable(StorageDims {
            cells: 100,
            dirs: 8,
            groups: 17,
        })
        .unwrap();
        assert_eq!(t.rows[0].values[1], 17218.0);
        let pct = |name: &str| -> Vec<f64> {
            t.rows
                .iter()
                .filter(|r| r.key == name)
                .map(|r| r.values[2])
                .collect()
        };
        for (got, want) in pct("pod-i").iter().zip(TABLE_POD_I) {
            assert!((got - want).abs() <= 0.05, "{got} vs {want}");
        }
        for (got, want) in pct("pod-rt").iter().zip(TABLE_POD_RT) {
            assert!((got - want).abs() <= 0.05, "{got} vs {want}");
        }
        assert_eq!(pct("pod-rt+f").len(), 7);
    }

    #[test]
    fn exit_codes_distinguish_numerical_failures() {
        assert_eq!(exit_code(&Error::ConfigInvalid("x".into())), 1);
        assert_eq!(
            exit_code(&Error::NotConverged {
                what: "x".into(),
                iterations: 1,
                last_change: 1.0,
                history: vec![],
            }),
            2
        );
    }

    #[test]
    fn cli_parses_flags() {
        let cli = Cli::try_parse_from([
            "mlqd",
            "run",
            "--scheme",
            "pod-rt",
            "--rank",
            "3",
            "--threads",
            "2",
        ])
        .unwrap();
        assert_eq!(cli.threads, Some(2));
        match cli.command {
            Command::Run(a) => {
                assert_eq!(a.scheme, Some(SchemeKind::PodRt));
                assert_eq!(a.rank, Some(3));
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["mlqd", "run", "--scheme", "svd"]).is_err());
    }
}
