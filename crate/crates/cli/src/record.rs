//! Experiment records (JSON-lines) and per-sample tables (CSV).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA: &str = include_str!("../schema/record.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    /// Tolerance the value is judged against, if any.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub config: RunConfig,
    pub measured: BTreeMap<String, Measurement>,
    pub verdicts: BTreeMap<String, bool>,
    pub pass: bool,
    pub duration_s: f64,
    pub version: String,
    /// Full library report.
    pub report: serde_json::Value,
}

/// Output of one experiment before it is stamped into a record.
#[derive(Default)]
pub struct Outcome {
    pub measured: BTreeMap<String, Measurement>,
    pub verdicts: BTreeMap<String, bool>,
    pub report: serde_json::Value,
    pub table: Option<Table>,
}

impl Outcome {
    pub fn value(&mut self, name: &str, value: f64) -> &mut Self {
        self.measured.insert(name.into(), Measurement { value, tolerance: None });
        self
    }

    pub fn judged(&mut self, name: &str, value: f64, tolerance: f64) -> &mut Self {
        self.measured.insert(name.into(), Measurement { value, tolerance: Some(tolerance) });
        self
    }

    pub fn verdict(&mut self, name: &str, ok: bool) -> &mut Self {
        self.verdicts.insert(name.into(), ok);
        self
    }

    pub fn report<T: Serialize>(&mut self, r: &T) -> &mut Self {
        self.report = serde_json::to_value(r).unwrap_or(serde_json::Value::Null);
        self
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }
}

/// Appends records to a file or stdout, flushing after each one.
pub struct Sink {
    out: Box<dyn Write>,
    csv: Option<csv::Writer<File>>,
    csv_header: bool,
}

impl Sink {
    pub fn open(config: &RunConfig) -> Result<Self, CliError> {
        let out: Box<dyn Write> = match &config.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{p}: {e}")))?)),
            None => Box::new(io::stdout()),
        };
        let csv = match &config.csv {
            Some(p) => Some(csv::Writer::from_path(p).map_err(|e| CliError::Io(format!("{p}: {e}")))?),
            None => None,
        };
        Ok(Sink { out, csv, csv_header: false })
    }

    pub fn write(&mut self, record: &ExperimentRecord, table: Option<&Table>, label: Option<f64>) -> Result<(), CliError> {
        let line = serde_json::to_string(record).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(|e| CliError::Io(e.to_string()))?;
        if let (Some(w), Some(t)) = (self.csv.as_mut(), table) {
            let io_err = |e: csv::Error| CliError::Io(e.to_string());
            if !self.csv_header {
                let mut h = t.header.clone();
                if label.is_some() {
                    h.insert(0, "sweep_value".into());
                }
                w.write_record(&h).map_err(io_err)?;
                self.csv_header = true;
            }
            for row in &t.rows {
                let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                if let Some(l) = label {
                    cells.insert(0, l.to_string());
                }
                w.write_record(&cells).map_err(io_err)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        Ok(())
    }
}
