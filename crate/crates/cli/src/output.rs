//! Tables rendered as CSV (header row, `\n` endings) or JSON.

use clap::ValueEnum;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Format as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Flag(bool),
    Text(String),
    Empty,
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Flag(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Flag(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Cell)>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), ..Self::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => self.csv(),
            Format::Json => Ok(self.json()),
        }
    }

    fn csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| CliError::generic(format!("csv output failed: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::generic(format!("csv output failed: {e}")))?;
        let mut out = String::from_utf8(bytes).map_err(|e| CliError::generic(e.to_string()))?;
        if !self.summary.is_empty() {
            let parts: Vec<String> = self.summary.iter().map(|(k, v)| format!("{k}={}", v.csv())).collect();
            out.push_str(&format!("# {}\n", parts.join(",")));
        }
        Ok(out)
    }

    fn json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.header.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(obj)
            })
            .collect();
        let mut top = Map::new();
        top.insert("rows".into(), Value::Array(rows));
        if !self.summary.is_empty() {
            let summary: Map<String, Value> = self.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
            top.insert("summary".into(), Value::Object(summary));
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(top)).expect("json values serialize");
        s.push('\n');
        s
    }
}
