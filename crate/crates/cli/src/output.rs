//! Tabular output as CSV or JSON.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use risforge_core::scenario::write_atomic;
use risforge_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Rows with a fixed CSV layout.
pub trait CsvRow: Serialize {
    const HEADER: &'static str;
    fn csv_fields(&self) -> Vec<String>;
}

impl CsvRow for crate::experiments::HeatmapRow {
    const HEADER: &'static str = "alpha_deg,beta_deg,capacity_bpshz";
    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.alpha_deg.to_string(),
            self.beta_deg.to_string(),
            self.capacity_bpshz.to_string(),
        ]
    }
}

impl CsvRow for crate::experiments::CompareRow {
    const HEADER: &'static str = "deployment,gain_db,ee_icdf68,epsilon_mean";
    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.deployment.clone(),
            self.gain_db.to_string(),
            self.ee_icdf68.to_string(),
            self.epsilon_mean.to_string(),
        ]
    }
}

impl CsvRow for crate::experiments::ConvergeRow {
    const HEADER: &'static str = "algorithm,total_iterations,seed,capacity_bpshz";
    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.total_iterations.to_string(),
            self.seed.to_string(),
            self.capacity_bpshz.to_string(),
        ]
    }
}

pub fn render<R: CsvRow>(rows: &[R], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut s = String::from(R::HEADER);
            s.push('\n');
            for r in rows {
                let _ = writeln!(s, "{}", r.csv_fields().join(","));
            }
            Ok(s)
        }
        Format::Json => to_json(rows),
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::NonFinite(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when it is `-`.
pub fn emit(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())?;
        out.flush()?;
        Ok(())
    } else {
        write_atomic(path, text.as_bytes())
    }
}
