//! Text formats for solution records and numeric tables.
//!
//! Every real is written with 17 significant digits in scientific notation,
//! which is enough for the parsed value to equal the written one bit for bit.
//!
//! A [`SolutionRecord`] file is a run of `# key = value` header lines
//! followed by one block per output time:
//!
//! ```text
//! # time = 4.0000000000000002e-1
//! cell,x,temperature,energy
//! 0,3.0000000000000000e-2,...,...
//! ```
//!
//! A [`Table`] is a plain CSV file whose first column is a text key and whose
//! remaining columns are reals.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::timestepper::{Problem, RunOutput};

/// Formats a real with 17 significant digits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(s: &str, what: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| format!("bad number `{s}` for {what}: {e}"))
}

fn record_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One row of a [`Table`].
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub key: String,
    pub values: Vec<f64>,
}

/// A CSV table with a leading text column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub key_column: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(key_column: &str, columns: &[&str]) -> Self {
        Self {
            key_column: key_column.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "row has {} values, table has {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        self.rows.push(Row {
            key: key.into(),
            values,
        });
        Ok(())
    }

    /// Values of the named column, top to bottom.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.key_column.as_str()];
        header.extend(self.columns.iter().map(String::as_str));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut fields = vec![row.key.clone()];
            fields.extend(row.values.iter().map(|&v| format_real(v)));
            w.write_record(&fields)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let mut fields = header.iter();
        let key_column = fields
            .next()
            .ok_or_else(|| Error::invalid("table without columns"))?
            .to_string();
        let mut table = Table {
            key_column,
            columns: fields.map(str::to_string).collect(),
            rows: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let mut it = rec.iter();
            let key = it.next().unwrap_or_default().to_string();
            let values = it
                .map(|s| parse_real(s, &key))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(Error::InvalidArgument)?;
            table.push(key, values)?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        write_file(path, &String::from_utf8_lossy(&buf))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

/// Temperature and grey radiation energy at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub temperature: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Cell-wise solution at a set of output times, with the grid it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub cells: usize,
    pub directions: usize,
    pub groups: usize,
    pub time_step: f64,
    pub scheme: String,
    pub rank: usize,
    /// extra `key = value` lines, typically the echoed configuration
    pub header: Vec<(String, String)>,
    pub centers: Vec<f64>,
    pub frames: Vec<Frame>,
}

impl SolutionRecord {
    /// Builds a record from a run; `times` selects the output times (all
    /// steps when `None`).
    pub fn from_run(
        problem: &Problem,
        output: &RunOutput,
        times: Option<&[f64]>,
        header: Vec<(String, String)>,
    ) -> Self {
        let frames = match times {
            Some(ts) => ts
                .iter()
                .map(|&t| output.snapshot_at(t))
                .map(|s| Frame {
                    time: s.time,
                    temperature: s.temperature.clone(),
                    energy: s.energy.clone(),
                })
                .collect(),
            None => output
                .snapshots
                .iter()
                .map(|s| Frame {
                    time: s.time,
                    temperature: s.temperature.clone(),
                    energy: s.energy.clone(),
                })
                .collect(),
        };
        Self {
            cells: problem.mesh.num_cells(),
            directions: problem.quadrature.len(),
            groups: problem.groups.num_groups(),
            time_step: problem.time.steps().first().copied().unwrap_or(0.0),
            scheme: output.scheme.name().to_string(),
            rank: output.scheme.rank().unwrap_or(0),
            header,
            centers: problem.mesh.centers(),
            frames,
        }
    }

    /// Frame whose time is closest to `t`.
    pub fn frame_at(&self, t: f64) -> Option<&Frame> {
        self.frames
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
    }

    /// Fails unless both records share the same phase-space and time grid.
    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        let ours = (
            self.cells,
            self.directions,
            self.groups,
            self.time_step.to_bits(),
        );
        let theirs = (
            other.cells,
            other.directions,
            other.groups,
            other.time_step.to_bits(),
        );
        if ours != theirs {
            return Err(Error::GridMismatch(format!(
                "J={} M={} G={} dt={} vs J={} M={} G={} dt={}",
                self.cells,
                self.directions,
                self.groups,
                self.time_step,
                other.cells,
                other.directions,
                other.groups,
                other.time_step
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# mlqd solution record\n");
        let mut line = |k: &str, v: String| s.push_str(&format!("# {k} = {v}\n"));
        line("cells", self.cells.to_string());
        line("directions", self.directions.to_string());
        line("groups", self.groups.to_string());
        line("time_step", format_real(self.time_step));
        line("scheme", self.scheme.clone());
        line("rank", self.rank.to_string());
        for (k, v) in &self.header {
            line(&format!("config.{k}"), v.clone());
        }
        for frame in &self.frames {
            s.push_str(&format!("# time = {}\n", format_real(frame.time)));
            s.push_str("cell,x,temperature,energy\n");
            for j in 0..self.cells {
                s.push_str(&format!(
                    "{j},{},{},{}\n",
                    format_real(self.centers[j]),
                    format_real(frame.temperature[j]),
                    format_real(frame.energy[j])
                ));
            }
        }
        s
    }

    /// Parses the text written by [`SolutionRecord::to_text`]; `path` only
    /// labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |m: String| record_error(path, m);
        let mut fields: Vec<(String, String)> = Vec::new();
        let mut blocks: Vec<(f64, String)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            if let Some(rest) = raw.strip_prefix('#') {
                let Some((k, v)) = rest.split_once('=') else {
                    continue;
                };
                let (k, v) = (k.trim(), v.trim());
                if k == "time" {
                    let t =
                        parse_real(v, "time").map_err(|m| err(format!("line {}: {m}", n + 1)))?;
                    blocks.push((t, String::new()));
                } else {
                    fields.push((k.to_string(), v.to_string()));
                }
            } else if raw.trim().is_empty() {
                continue;
            } else {
                let Some((_, body)) = blocks.last_mut() else {
                    return Err(err(format!(
                        "line {}: data before the first time block",
                        n + 1
                    )));
                };
                body.push_str(raw);
                body.push('\n');
            }
        }
        let take = |name: &str| -> Result<String> {
            fields
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| err(format!("missing header field `{name}`")))
        };
        let count = |name: &str| -> Result<usize> {
            take(name)?
                .parse::<usize>()
                .map_err(|e| err(format!("header field `{name}`: {e}")))
        };
        let cells = count("cells")?;
        let directions = count("directions")?;
        let groups = count("groups")?;
        let rank = count("rank")?;
        let time_step = parse_real(&take("time_step")?, "time_step").map_err(err)?;
        let scheme = take("scheme")?;
        let header = fields
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix("config.")
                    .map(|k| (k.to_string(), v.clone()))
            })
            .collect();

        let mut centers = Vec::new();
        let mut frames = Vec::with_capacity(blocks.len());
        for (b, (time, body)) in blocks.iter().enumerate() {
            let mut reader = csv::Reader::from_reader(body.as_bytes());
            let mut x = Vec::with_capacity(cells);
            let mut temperature = Vec::with_capacity(cells);
            let mut energy = Vec::with_capacity(cells);
            for rec in reader.records() {
                let rec = rec?;
                if rec.len() != 4 {
                    return Err(err(format!(
                        "block {b}: expected 4 columns, got {}",
                        rec.len()
                    )));
                }
                x.push(parse_real(&rec[1], "x").map_err(err)?);
                temperature.push(parse_real(&rec[2], "temperature").map_err(err)?);
                energy.push(parse_real(&rec[3], "energy").map_err(err)?);
            }
            if temperature.len() != cells {
                return Err(err(format!(
                    "block at t={time}: {} rows for {cells} cells",
                    temperature.len()
                )));
            }
            if b == 0 {
                centers = x;
            }
            frames.push(Frame {
                time: *time,
                temperature,
                energy,
            });
        }
        if centers.is_empty() {
            centers = vec![f64::NAN; cells];
        }
        Ok(Self {
            cells,
            directions,
            groups,
            time_step,
            scheme,
            rank,
            header,
            centers,
            frames,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SolutionRecord {
        SolutionRecord {
            cells: 3,
            directions: 2,
            groups: 1,
            time_step: 0.02,
            scheme: "pod-rt".into(),
            rank: 1,
            header: vec![("time.step".into(), "0.02".into())],
            centers: vec![0.5, 1.5, 2.5],
            frames: vec![
                Frame {
                    time: 0.0,
                    temperature: vec![0.001; 3],
                    energy: vec![1e-14, 2e-300, 0.0],
                },
                Frame {
                    time: 0.1 + 0.2,
                    temperature: vec![1.0 / 3.0, std::f64::consts::PI, -0.0],
                    energy: vec![f64::MIN_POSITIVE, 1.7976931348623157e308, 5e-324],
                },
            ],
        }
    }

    #[test]
    fn record_round_trip_is_bitwise() {
        let rec = sample();
        let back = SolutionRecord::parse(&rec.to_text(), Path::new("mem")).unwrap();
        assert_eq!(rec.to_text(), back.to_text());
        for (a, b) in rec.frames.iter().zip(&back.frames) {
            assert_eq!(a.time.to_bits(), b.time.to_bits());
            for (x, y) in a.temperature.iter().zip(&b.temperature) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.energy.iter().zip(&b.energy) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back.header, rec.header);
    }

    #[test]
    fn truncated_block_is_rejected() {
        let mut text = sample().to_text();
        text.truncate(text.trim_end().rfind('\n').unwrap());
        match SolutionRecord::parse(&text, Path::new("cut")) {
            Err(Error::Record { message, .. }) => assert!(message.contains("rows"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_round_trip_is_bitwise() {
        let mut t = Table::new("scheme", &["rank", "value"]);
        t.push("pod-i", vec![1.0, 0.1 + 0.2]).unwrap();
        t.push("pod-rt", vec![2.0, -1e-310]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Table::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(
            back.column("value").unwrap()[0].to_bits(),
            (0.1f64 + 0.2).to_bits()
        );
        assert!(t.push("x", vec![1.0]).is_err());
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = sample();
        let mut b = sample();
        b.time_step = 0.01;
        assert!(matches!(a.check_same_grid(&b), Err(Error::GridMismatch(_))));
        assert!(a.check_same_grid(&sample()).is_ok());
    }
}
