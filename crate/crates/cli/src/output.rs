use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub accrual_a: f64,
    pub n: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InflationSummary {
    pub accrual_a: f64,
    pub followup_f: f64,
    pub pi: f64,
    pub alpha: f64,
    pub expected_var_oslr: f64,
    pub expected_var_new: f64,
    pub inflated_level: f64,
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => File::create(path)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

/// Writes `value` as JSON, or `rows` as CSV.
pub fn emit<T: Serialize, R: Serialize>(
    value: &T,
    rows: &[R],
    format: &Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::input(format!("write failed: {e}"));
    let mut w = sink(out)?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::input(e.to_string()))?;
            writeln!(w).map_err(io_err)?;
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            for row in rows {
                csv.serialize(row).map_err(|e| Failure::input(e.to_string()))?;
            }
            csv.flush().map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}
