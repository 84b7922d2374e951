//! Run configuration files.
//!
//! Configurations are TOML documents with five sections. Required keys are
//! marked with `*`; everything else has a default.
//!
//! | section     | keys |
//! |-------------|------|
//! | `[problem]` | `length*`, `inflow_temperature*`, `initial_temperature*`, `heat_capacity_coefficient*`, `left_boundary` (`"source"`), `right_boundary` (`"vacuum"`), `speed_of_light`, `radiation_constant` |
//! | `[grid]`    | `cells*` or `cell_width*`, `order_per_half*`, `group_edges` (17-group default) |
//! | `[time]`    | `end*`, `step*`, `start` (0) |
//! | `[scheme]`  | `kind*` (`"be"`, `"pod-i"`, `"pod-rt"`), `rank` (required for POD kinds), `temperature_tolerance`, `energy_tolerance`, `max_outer`, `max_inner`, `anderson_depth` |
//! | `[output]`  | `directory` (`"out"`), `times` (every step when absent) |
//!
//! The heat capacity is `heat_capacity_coefficient * a_R * inflow_temperature^3`.
//! A `"source"` boundary emits black-body radiation at the inflow
//! temperature; a `"vacuum"` boundary has no incoming radiation.

use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::compression::Scheme;
use crate::error::{Error, Result};
use crate::quadrature::{AngularQuadrature, SpatialMesh, TimeGrid};
use crate::record::format_real;
use crate::spectral::{GroupStructure, PhysicalConstants};
use crate::timestepper::{Problem, Tolerances};

/// Path of the bundled Fleck-Cummings configuration.
pub const FC_TEST_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/fc_test.cfg");

const REQUIRED: &[&str] = &[
    "problem.length",
    "problem.inflow_temperature",
    "problem.initial_temperature",
    "problem.heat_capacity_coefficient",
    "grid.cells",
    "grid.order_per_half",
    "time.end",
    "time.step",
    "scheme.kind",
];

const KNOWN: &[(&str, &[&str])] = &[
    (
        "problem",
        &[
            "length",
            "inflow_temperature",
            "initial_temperature",
            "heat_capacity_coefficient",
            "left_boundary",
            "right_boundary",
            "speed_of_light",
            "radiation_constant",
        ],
    ),
    (
        "grid",
        &["cells", "cell_width", "order_per_half", "group_edges"],
    ),
    ("time", &["end", "step", "start"]),
    (
        "scheme",
        &[
            "kind",
            "rank",
            "temperature_tolerance",
            "energy_tolerance",
            "max_outer",
            "max_inner",
            "anderson_depth",
        ],
    ),
    ("output", &["directory", "times"]),
];

/// Radiation entering through a slab face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// black body at the inflow temperature
    Source,
    Vacuum,
}

impl Boundary {
    fn name(self) -> &'static str {
        match self {
            Boundary::Source => "source",
            Boundary::Vacuum => "vacuum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub length: f64,
    pub inflow_temperature: f64,
    pub initial_temperature: f64,
    pub heat_capacity_coefficient: f64,
    pub left_boundary: Boundary,
    pub right_boundary: Boundary,
    pub constants: PhysicalConstants,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub cells: usize,
    pub order_per_half: usize,
    pub group_edges: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSection {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// `None` writes every step
    pub times: Option<Vec<f64>>,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub scheme: Scheme,
    pub tolerances: Tolerances,
    pub output: OutputSection,
}

impl RunConfig {
    /// The Fleck-Cummings test with full storage.
    pub fn fleck_cummings() -> Self {
        Self {
            problem: ProblemSection {
                length: 6.0,
                inflow_temperature: 1.0,
                initial_temperature: 0.001,
                heat_capacity_coefficient: 0.5917,
                left_boundary: Boundary::Source,
                right_boundary: Boundary::Vacuum,
                constants: PhysicalConstants::default(),
            },
            grid: GridSection {
                cells: 100,
                order_per_half: 4,
                group_edges: GroupStructure::fleck_cummings_default().edges().to_vec(),
            },
            time: TimeSection {
                start: 0.0,
                end: 6.0,
                step: 0.02,
            },
            scheme: Scheme::Full,
            tolerances: Tolerances::default(),
            output: OutputSection {
                directory: PathBuf::from("out"),
                times: None,
            },
        }
    }

    pub fn directions(&self) -> usize {
        2 * self.grid.order_per_half
    }

    /// Largest admissible POD rank, `d = min(J, M)`.
    pub fn max_rank(&self) -> usize {
        self.grid.cells.min(self.directions())
    }

    /// Replaces the scheme after checking its rank against the grid.
    pub fn with_scheme(mut self, scheme: Scheme) -> Result<Self> {
        check_rank(scheme, self.grid.cells, self.directions())?;
        self.scheme = scheme;
        Ok(self)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let p = &self.problem;
        let left = match p.left_boundary {
            Boundary::Source => p.inflow_temperature,
            Boundary::Vacuum => 0.0,
        };
        let right = match p.right_boundary {
            Boundary::Source => p.inflow_temperature,
            Boundary::Vacuum => 0.0,
        };
        let problem = Problem {
            mesh: SpatialMesh::uniform(p.length, self.grid.cells)?,
            quadrature: AngularQuadrature::double_gauss(self.grid.order_per_half)?,
            groups: GroupStructure::new(self.grid.group_edges.clone())?,
            constants: p.constants,
            time: TimeGrid::uniform(self.time.start, self.time.end, self.time.step)?,
            heat_capacity: p.heat_capacity_coefficient
                * p.constants.a_rad
                * p.inflow_temperature.powi(3),
            initial_temperature: p.initial_temperature,
            left_temperature: left,
            right_temperature: right,
            tolerances: self.tolerances,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Every field as `key = value` text, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.problem;
        let edges = self
            .grid
            .group_edges
            .iter()
            .map(|&e| format_real(e))
            .collect::<Vec<_>>()
            .join(" ");
        let times = match &self.output.times {
            Some(ts) => ts
                .iter()
                .map(|&t| format_real(t))
                .collect::<Vec<_>>()
                .join(" "),
            None => "all".to_string(),
        };
        let t = &self.tolerances;
        [
            ("problem.length", format_real(p.length)),
            (
                "problem.inflow_temperature",
                format_real(p.inflow_temperature),
            ),
            (
                "problem.initial_temperature",
                format_real(p.initial_temperature),
            ),
            (
                "problem.heat_capacity_coefficient",
                format_real(p.heat_capacity_coefficient),
            ),
            ("problem.left_boundary", p.left_boundary.name().to_string()),
            (
                "problem.right_boundary",
                p.right_boundary.name().to_string(),
            ),
            ("problem.speed_of_light", format_real(p.constants.c)),
            ("problem.radiation_constant", format_real(p.constants.a_rad)),
            ("grid.cells", self.grid.cells.to_string()),
            ("grid.order_per_half", self.grid.order_per_half.to_string()),
            ("grid.group_edges", edges),
            ("time.start", format_real(self.time.start)),
            ("time.end", format_real(self.time.end)),
            ("time.step", format_real(self.time.step)),
            ("scheme.kind", self.scheme.name().to_string()),
            ("scheme.rank", self.scheme.rank().unwrap_or(0).to_string()),
            ("scheme.temperature_tolerance", format_real(t.temperature)),
            ("scheme.energy_tolerance", format_real(t.energy)),
            ("scheme.max_outer", t.max_outer.to_string()),
            ("scheme.max_inner", t.max_inner.to_string()),
            ("scheme.anderson_depth", t.anderson_depth.to_string()),
            (
                "output.directory",
                self.output.directory.display().to_string(),
            ),
            ("output.times", times),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Parses a scheme name and optional rank.
pub fn parse_scheme(kind: &str, rank: Option<usize>) -> Result<Scheme> {
    match (kind, rank) {
        ("be", _) => Ok(Scheme::Full),
        ("pod-i", Some(rank)) => Ok(Scheme::PodI { rank }),
        ("pod-rt", Some(rank)) => Ok(Scheme::PodRt { rank }),
        ("pod-i" | "pod-rt", None) => Err(Error::ConfigInvalid(format!(
            "scheme.rank is required for scheme `{kind}`"
        ))),
        _ => Err(Error::ConfigInvalid(format!(
            "scheme.kind must be one of be, pod-i, pod-rt (got `{kind}`)"
        ))),
    }
}

/// Checks `rank` against `d = min(J, M)`.
pub fn check_rank(scheme: Scheme, cells: usize, directions: usize) -> Result<()> {
    let d = cells.min(directions);
    match scheme {
        Scheme::Full => Ok(()),
        Scheme::PodI { rank } if rank == 0 || rank > d => Err(Error::ConfigInvalid(format!(
            "scheme.rank = {rank} is outside 1..=d where d = min(J, M) = min({cells}, {directions}) = {d}"
        ))),
        Scheme::PodRt { rank } if rank > d => Err(Error::ConfigInvalid(format!(
            "scheme.rank = {rank} exceeds d = min(J, M) = min({cells}, {directions}) = {d}"
        ))),
        _ => Ok(()),
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, if it can be found textually.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section
            && t.split('=')
                .next()
                .map(str::trim)
                .is_some_and(|k| k.trim_matches('"') == key)
        {
            return Some(n + 1);
        }
    }
    None
}

struct Fields<'a> {
    root: &'a Table,
}

impl<'a> Fields<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.root.get(section)?.as_table()?.get(key)
    }

    fn real(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(wrong_type(section, key, "a number", other)),
        }
    }

    fn count(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
            Some(other) => Err(wrong_type(section, key, "a non-negative integer", other)),
        }
    }

    fn text(&self, section: &str, key: &str) -> Result<Option<&'a str>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(wrong_type(section, key, "a string", other)),
        }
    }

    fn reals(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(x) => Ok(*x as f64),
                    other => Err(wrong_type(section, key, "an array of numbers", other)),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(other) => Err(wrong_type(section, key, "an array of numbers", other)),
        }
    }
}

fn wrong_type(section: &str, key: &str, expected: &str, got: &Value) -> Error {
    Error::ConfigInvalid(format!(
        "{section}.{key} must be {expected}, got {}",
        got.type_str()
    ))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ConfigInvalid(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn boundary(name: &str, value: Option<&str>, default: Boundary) -> Result<Boundary> {
    match value {
        None => Ok(default),
        Some("source") => Ok(Boundary::Source),
        Some("vacuum") => Ok(Boundary::Vacuum),
        Some(other) => Err(Error::ConfigInvalid(format!(
            "{name} must be \"source\" or \"vacuum\", got \"{other}\""
        ))),
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::ConfigParse {
            line: e.span().map_or(0, |s| line_at(text, s.start)),
            message: e.message().to_string(),
        })?;

    for (section, value) in &root {
        let Some((_, keys)) = KNOWN.iter().find(|(s, _)| s == section) else {
            return Err(Error::ConfigParse {
                line: line_of_key(text, "", section)
                    .or_else(|| {
                        text.lines()
                            .position(|l| l.trim() == format!("[{section}]"))
                            .map(|n| n + 1)
                    })
                    .unwrap_or(0),
                message: format!("unknown section `{section}`"),
            });
        };
        let Some(table) = value.as_table() else {
            return Err(Error::ConfigInvalid(format!(
                "`{section}` must be a section"
            )));
        };
        if let Some(key) = table.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(Error::ConfigParse {
                line: line_of_key(text, section, key).unwrap_or(0),
                message: format!("unknown key `{section}.{key}`"),
            });
        }
    }

    let f = Fields { root: &root };
    let missing: Vec<&str> = REQUIRED
        .iter()
        .copied()
        .filter(|path| {
            let (s, k) = path.split_once('.').expect("dotted path");
            if *path == "grid.cells" {
                f.get(s, k).is_none() && f.get("grid", "cell_width").is_none()
            } else {
                f.get(s, k).is_none()
            }
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::ConfigInvalid(format!(
            "missing required fields: {}",
            missing.join(", ")
        )));
    }

    let defaults = RunConfig::fleck_cummings();
    let req = |s: &str, k: &str| -> Result<f64> {
        positive(&format!("{s}.{k}"), f.real(s, k)?.expect("checked above"))
    };
    let length = req("problem", "length")?;
    let constants = PhysicalConstants::new(
        f.real("problem", "speed_of_light")?
            .unwrap_or(defaults.problem.constants.c),
        f.real("problem", "radiation_constant")?
            .unwrap_or(defaults.problem.constants.a_rad),
    )
    .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let problem = ProblemSection {
        length,
        inflow_temperature: req("problem", "inflow_temperature")?,
        initial_temperature: req("problem", "initial_temperature")?,
        heat_capacity_coefficient: req("problem", "heat_capacity_coefficient")?,
        left_boundary: boundary(
            "problem.left_boundary",
            f.text("problem", "left_boundary")?,
            Boundary::Source,
        )?,
        right_boundary: boundary(
            "problem.right_boundary",
            f.text("problem", "right_boundary")?,
            Boundary::Vacuum,
        )?,
        constants,
    };

    let cells = match (f.count("grid", "cells")?, f.real("grid", "cell_width")?) {
        (Some(_), Some(_)) => {
            return Err(Error::ConfigInvalid(
                "give either grid.cells or grid.cell_width, not both".into(),
            ))
        }
        (Some(n), None) => n,
        (None, Some(w)) => {
            let w = positive("grid.cell_width", w)?;
            let n = (length / w).round();
            if n < 1.0 || ((n * w - length) / length).abs() > 1e-9 {
                return Err(Error::ConfigInvalid(format!(
                    "grid.cell_width = {w} does not divide problem.length = {length}"
                )));
            }
            n as usize
        }
        (None, None) => unreachable!("checked above"),
    };
    if cells == 0 {
        return Err(Error::ConfigInvalid("grid.cells must be at least 1".into()));
    }
    let order_per_half = f.count("grid", "order_per_half")?.expect("checked above");
    if order_per_half == 0 {
        return Err(Error::ConfigInvalid(
            "grid.order_per_half must be at least 1".into(),
        ));
    }
    let group_edges = f
        .reals("grid", "group_edges")?
        .unwrap_or(defaults.grid.group_edges);
    GroupStructure::new(group_edges.clone())
        .map_err(|e| Error::ConfigInvalid(format!("grid.group_edges: {e}")))?;
    let grid = GridSection {
        cells,
        order_per_half,
        group_edges,
    };

    let start = f.real("time", "start")?.unwrap_or(0.0);
    let time = TimeSection {
        start,
        end: req("time", "end")?,
        step: req("time", "step")?,
    };
    if !(time.end > start) {
        return Err(Error::ConfigInvalid(format!(
            "time.end = {} must exceed time.start = {start}",
            time.end
        )));
    }

    let kind = f.text("scheme", "kind")?.expect("checked above");
    let scheme = parse_scheme(kind, f.count("scheme", "rank")?)?;
    check_rank(scheme, cells, 2 * order_per_half)?;
    let mut tolerances = Tolerances::default();
    if let Some(v) = f.real("scheme", "temperature_tolerance")? {
        tolerances.temperature = positive("scheme.temperature_tolerance", v)?;
    }
    if let Some(v) = f.real("scheme", "energy_tolerance")? {
        tolerances.energy = positive("scheme.energy_tolerance", v)?;
    }
    if let Some(n) = f.count("scheme", "max_outer")? {
        tolerances.max_outer = n.max(1);
    }
    if let Some(n) = f.count("scheme", "max_inner")? {
        tolerances.max_inner = n.max(1);
    }
    if let Some(n) = f.count("scheme", "anderson_depth")? {
        tolerances.anderson_depth = n;
    }

    let times = f.reals("output", "times")?;
    if let Some(ts) = &times {
        if let Some(t) = ts.iter().find(|&&t| !(t >= start && t <= time.end)) {
            return Err(Error::ConfigInvalid(format!(
                "output.times entry {t} lies outside [{start}, {}]",
                time.end
            )));
        }
    }
    let output = OutputSection {
        directory: PathBuf::from(f.text("output", "directory")?.unwrap_or("out")),
        times,
    };

    Ok(RunConfig {
        problem,
        grid,
        time,
        scheme,
        tolerances,
        output,
    })
}
