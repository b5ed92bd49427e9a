//! In-memory CSV tables and their atomic emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => significant(*x, 9),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

/// `x` rounded to `digits` significant digits, without trailing zeros;
/// exponent form outside `[1e-5, 1e15)`.
pub fn significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..15).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x))
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric value of `name` in the row labelled `label`.
    pub fn value(&self, label: &str, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        self.rows.iter().find(|r| matches!(&r[0], Cell::Text(t) if t == label)).and_then(|r| r[c].as_f64())
    }

    /// Numeric column `name`, skipping empty cells.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.rows.iter().filter_map(|r| r[c].as_f64()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    /// Writes the table to `path` via a temporary file in the same directory.
    pub fn write_atomic(&self, path: &Path) -> CliResult<()> {
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
        tmp.write_all(self.to_csv().as_bytes()).map_err(|e| CliError::io(path, e))?;
        tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
        Ok(())
    }
}

/// Indexed column names `prefix1..prefixN`.
pub fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// `iteration,C1..CP,h1..hK,objective,converged`.
pub fn trace_header(partitions: usize, providers: usize) -> Vec<String> {
    std::iter::once("iteration".to_string())
        .chain(indexed("C", partitions))
        .chain(indexed("h", providers))
        .chain(["objective".to_string(), "converged".to_string()])
        .collect()
}

/// `label,C1..CP,h1..hK,aggregate_hit_probability,objective,reference_objective`.
pub fn summary_header(partitions: usize, providers: usize) -> Vec<String> {
    std::iter::once("label".to_string())
        .chain(indexed("C", partitions))
        .chain(indexed("h", providers))
        .chain(["aggregate_hit_probability", "objective", "reference_objective"].map(String::from))
        .collect()
}

/// One row in the summary layout; missing sizes are left empty.
pub fn summary_row(label: &str, sizes: &[f64], partitions: usize, hits: &[f64], aggregate: f64, objective: f64, reference: Option<f64>) -> Vec<Cell> {
    let mut row = vec![Cell::from(label)];
    row.extend((0..partitions).map(|p| sizes.get(p).copied().into()));
    row.extend(hits.iter().map(|&h| Cell::Num(h)));
    row.extend([Cell::Num(aggregate), Cell::Num(objective), reference.into()]);
    row
}

/// One row in the trace layout.
pub fn trace_row(iteration: usize, sizes: &[f64], hits: &[f64], objective: f64, converged: bool) -> Vec<Cell> {
    let mut row = vec![Cell::from(iteration)];
    row.extend(sizes.iter().map(|&c| Cell::Num(c)));
    row.extend(hits.iter().map(|&h| Cell::Num(h)));
    row.extend([Cell::Num(objective), Cell::Bool(converged)]);
    row
}
