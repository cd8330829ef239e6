use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;

use super::{Field, GridSpec};
use crate::error::{LabError, Result};

/// One measured ratio `lhs / rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub module: String,
    pub op: String,
    pub n: usize,
    pub delta: Option<f64>,
    pub big_r: Option<f64>,
    pub q: f64,
    pub r: Option<f64>,
    pub seed: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub runtime_s: f64,
    /// Evaluation method tag (direct, capframe, gridded, ...).
    pub method: String,
    /// Norm tag (full_grid or stratified).
    pub norm: String,
    pub converged: bool,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "module", "op", "n", "delta", "R", "q", "r", "seed", "lhs", "rhs", "ratio", "stderr", "runtime_s",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl RatioReport {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.module.clone(),
            self.op.clone(),
            self.n.to_string(),
            opt(self.delta),
            opt(self.big_r),
            self.q.to_string(),
            opt(self.r),
            opt(self.seed),
            self.lhs.to_string(),
            self.rhs.to_string(),
            self.ratio.to_string(),
            self.stderr.to_string(),
            self.runtime_s.to_string(),
        ]
    }
}

/// Appends reports to a CSV file, writing the header when the file is new.
pub struct ReportSink {
    writer: csv::Writer<File>,
}

impl ReportSink {
    pub fn append(path: &Path) -> Result<ReportSink> {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut writer = csv::Writer::from_writer(file);
        if fresh {
            writer.write_record(CSV_COLUMNS).map_err(csv_err)?;
        }
        Ok(ReportSink { writer })
    }

    pub fn write(&mut self, report: &RatioReport) -> Result<()> {
        self.writer.write_record(report.csv_record()).map_err(csv_err)?;
        self.writer.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub grid: GridSpec,
    pub dtype: String,
    pub count: usize,
    pub provenance: serde_json::Value,
}

/// Writes `<stem>.json` and `<stem>.bin` (little-endian complex64, row-major,
/// last axis fastest).
pub fn write_field(field: &Field, stem: &Path, provenance: serde_json::Value) -> Result<()> {
    let header = FieldHeader {
        grid: field.grid,
        dtype: "complex64-le".into(),
        count: field.values.len(),
        provenance,
    };
    std::fs::write(stem.with_extension("json"), serde_json::to_vec_pretty(&header)?)?;
    let mut bytes = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    File::create(stem.with_extension("bin"))?.write_all(&bytes)?;
    Ok(())
}

pub fn read_field(stem: &Path) -> Result<(FieldHeader, Vec<Complex64>)> {
    let header: FieldHeader = serde_json::from_slice(&std::fs::read(stem.with_extension("json"))?)?;
    let mut bytes = Vec::new();
    File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
    if bytes.len() != header.count * 8 {
        return Err(LabError::Mismatch(format!(
            "{} bytes for {} complex64 values",
            bytes.len(),
            header.count
        )));
    }
    let f = |c: &[u8]| f32::from_le_bytes(c.try_into().unwrap()) as f64;
    let values = bytes.chunks_exact(8).map(|c| Complex64::new(f(&c[..4]), f(&c[4..]))).collect();
    Ok((header, values))
}
