use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

pub const DEFECT_MAP: &[&str] = &["position_um", "width_um"];
pub const EFFICIENCY_SWEEP: &[&str] = &["pump_mw", "eta_int"];
pub const NOISE_SWEEP: &[&str] = &["pump_mw", "counts_hz"];
pub const CUTBACK: &[&str] = &["length_cm", "transmission"];
pub const FP_SPECTRUM: &[&str] = &["frequency_ghz", "transmission"];
pub const NOISE_PROFILE: &[&str] = &["temperature_c", "counts_hz"];

/// Every problem found while reading one input table.
#[derive(Debug)]
pub struct SchemaError {
    pub path: String,
    pub problems: Vec<String>,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} problem(s)", self.path, self.problems.len())?;
        for p in &self.problems {
            write!(f, "\n  {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SchemaError {}

pub type Pairs = Vec<(f64, f64)>;

/// Reads a two-column numeric table. Blank lines and `#` lines are skipped;
/// the first remaining line must be the header. Returns rows and raw bytes.
pub fn read_pairs(path: &Path, schema: &[&str]) -> Result<(Pairs, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let pairs = parse_pairs(&bytes, schema).map_err(|problems| SchemaError {
        path: path.display().to_string(),
        problems,
    })?;
    Ok((pairs, bytes))
}

pub fn parse_pairs(bytes: &[u8], schema: &[&str]) -> std::result::Result<Vec<(f64, f64)>, Vec<String>> {
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => return Err(vec![format!("not valid UTF-8: {e}")]),
    };
    let mut problems = Vec::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = match split_fields(trimmed) {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        if !header_seen {
            header_seen = true;
            check_header(&rec, schema, line, &mut problems);
            continue;
        }
        if rec.len() != schema.len() {
            problems.push(format!("line {line}: expected {} fields, found {}", schema.len(), rec.len()));
            continue;
        }
        let mut vals = [0.0; 2];
        let mut ok = true;
        for (i, field) in rec.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => vals[i] = v,
                _ => {
                    ok = false;
                    problems.push(format!("line {line}, column `{}`: `{field}` is not a finite number", schema[i]));
                }
            }
        }
        if ok {
            rows.push((vals[0], vals[1]));
        }
    }
    if !header_seen {
        problems.push(format!("missing header row `{}`", schema.join(",")));
    } else if rows.is_empty() && problems.is_empty() {
        problems.push("no data rows".into());
    }
    if problems.is_empty() {
        Ok(rows)
    } else {
        Err(problems)
    }
}

fn check_header(rec: &csv::StringRecord, schema: &[&str], line: usize, problems: &mut Vec<String>) {
    let got: Vec<&str> = rec.iter().collect();
    if got == schema {
        return;
    }
    for (i, want) in schema.iter().enumerate() {
        match got.get(i) {
            Some(g) if g == want => {}
            Some(g) => problems.push(format!("line {line}, column {}: expected `{want}`, found `{g}`", i + 1)),
            None => problems.push(format!("line {line}: missing column `{want}`")),
        }
    }
    for (i, extra) in got.iter().enumerate().skip(schema.len()) {
        problems.push(format!("line {line}, column {}: unexpected column `{extra}`", i + 1));
    }
}

fn split_fields(line: &str) -> std::result::Result<csv::StringRecord, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(line.as_bytes());
    let mut rec = csv::StringRecord::new();
    rdr.read_record(&mut rec)?;
    Ok(rec)
}

/// Output table; cells are preformatted.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = Cell>) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn write(&self, dir: &Path, preamble: &str) -> Result<std::path::PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
        wtr.write_record(&self.header)?;
        for r in &self.rows {
            wtr.write_record(r)?;
        }
        let body = wtr.into_inner().context("flushing csv buffer")?;
        let mut out = preamble.as_bytes().to_vec();
        out.extend_from_slice(&body);
        fs::write(&path, out).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

pub enum Cell {
    Num(f64),
    Int(u64),
    Missing,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Missing => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_blank_lines() {
        let src = b"# exported\nlength_cm,transmission\n\n0.5,0.8\n# mid comment\n1.0, 0.6\n";
        assert_eq!(parse_pairs(src, CUTBACK).unwrap(), vec![(0.5, 0.8), (1.0, 0.6)]);
    }

    #[test]
    fn reports_every_bad_cell_with_its_line() {
        let src = b"pump_mw,eta_int\n1,0.1\nx,0.2\n3,nan\n4\n";
        let err = parse_pairs(src, EFFICIENCY_SWEEP).unwrap_err();
        assert_eq!(err.len(), 3, "{err:?}");
        assert!(err[0].starts_with("line 3, column `pump_mw`"));
        assert!(err[1].starts_with("line 4, column `eta_int`"));
        assert!(err[2].starts_with("line 5: expected 2 fields"));
    }

    #[test]
    fn header_mismatch_names_each_column() {
        let err = parse_pairs(b"pos,width_um,extra\n1,2,3\n", DEFECT_MAP).unwrap_err();
        assert!(err.iter().any(|e| e.contains("expected `position_um`, found `pos`")));
        assert!(err.iter().any(|e| e.contains("unexpected column `extra`")));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(parse_pairs(b"", CUTBACK).unwrap_err()[0].contains("missing header"));
        assert!(parse_pairs(b"length_cm,transmission\n", CUTBACK).unwrap_err()[0].contains("no data rows"));
    }
}
