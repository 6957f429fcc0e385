//! Matrix files.
//!
//! CSV files hold one sample per row, with an optional header row detected
//! by a non-numeric first line. Binary files use the `KTM1` layout: the four
//! magic bytes, then `rows` and `cols` as little-endian `u64`, then the
//! entries row-major as little-endian IEEE-754 doubles. In both formats a
//! file row is a sample, so loading transposes into the `d × n` convention.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use kt_core::DataMatrix;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"KTM1";
const HEADER_LEN: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    Bin,
}

impl MatrixFormat {
    /// `.csv` is CSV; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Bin,
        }
    }
}

/// Loads a file of `n` rows by `d` columns as a `d × n` matrix.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DataMatrix> {
    let rows = match format {
        MatrixFormat::Csv => read_csv_rows(path)?,
        MatrixFormat::Bin => read_bin(path)?,
    };
    let m = rows.transpose();
    DataMatrix::new(m).map_err(|e| HarnessError::parse(path, "contents", e.to_string()))
}

pub fn load_matrix_auto(path: &Path) -> Result<DataMatrix> {
    load_matrix(path, MatrixFormat::from_path(path))
}

/// Writes a `d × n` matrix as `n` rows of `d` columns.
pub fn save_matrix(path: &Path, m: &DataMatrix, format: MatrixFormat) -> Result<()> {
    let rows = m.transpose();
    match format {
        MatrixFormat::Csv => write_csv(path, &rows, None),
        MatrixFormat::Bin => write_bin(path, &rows),
    }
}

pub fn save_matrix_auto(path: &Path, m: &DataMatrix) -> Result<()> {
    save_matrix(path, m, MatrixFormat::from_path(path))
}

fn parse_row(record: &csv::StringRecord) -> Option<Vec<f64>> {
    record.iter().map(|c| c.trim().parse::<f64>().ok()).collect()
}

fn read_csv_rows(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(i as u64 + 1, |p| p.line());
            HarnessError::parse(path, format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed = parse_row(&record);
        let row = match parsed {
            Some(r) => r,
            None if i == 0 => continue,
            None => {
                let bad = record
                    .iter()
                    .position(|c| c.parse::<f64>().is_err())
                    .unwrap_or(0);
                return Err(HarnessError::parse(
                    path,
                    format!("line {line}, column {}", bad + 1),
                    format!("non-numeric cell {:?}", &record[bad]),
                ));
            }
        };
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(HarnessError::parse(
                    path,
                    format!("line {line}"),
                    format!("expected {w} columns, found {}", row.len()),
                ))
            }
            _ => {}
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(HarnessError::parse(
                path,
                format!("line {line}, column {}", c + 1),
                "non-finite value",
            ));
        }
        values.extend(row);
        rows += 1;
    }
    let cols = width.ok_or_else(|| HarnessError::parse(path, "line 1", "no data rows"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Writes `m` with one CSV row per matrix row. `Display` for `f64` prints
/// the shortest string that parses back to the same value.
pub fn write_csv(path: &Path, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| HarnessError::parse(path, "write", e.to_string());
    if let Some(h) = header {
        w.write_record(h).map_err(to_err)?;
    }
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn read_bin(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let len = file.metadata().map_err(|e| HarnessError::io(path, e))?.len();
    let mut r = BufReader::new(file);
    let mut header = [0u8; HEADER_LEN as usize];
    r.read_exact(&mut header)
        .map_err(|_| HarnessError::parse(path, "offset 0", format!("file shorter than the {HEADER_LEN}-byte header")))?;
    if &header[..4] != MAGIC {
        return Err(HarnessError::parse(path, "offset 0", "bad magic, expected KTM1"));
    }
    let rows = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(header[12..20].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(len) {
        return Err(HarnessError::parse(
            path,
            format!("offset {HEADER_LEN}"),
            format!("{rows}x{cols} header does not match file length {len}"),
        ));
    }
    let n = (rows * cols) as usize;
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(|e| HarnessError::io(path, e))?;
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(HarnessError::parse(
            path,
            format!("offset {}", HEADER_LEN + 8 * k as u64),
            "non-finite value",
        ));
    }
    Ok(DMatrix::from_row_slice(rows as usize, cols as usize, &values))
}

fn write_bin(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| HarnessError::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.ncols() as u64).to_le_bytes()).map_err(io)?;
    for i in 0..m.nrows() {
        for v in m.row(i).iter() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Integer class labels, one per line or one per CSV row (first column).
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let m = load_matrix_auto(path)?;
    if m.dim() != 1 {
        return Err(HarnessError::parse(
            path,
            "line 1",
            format!("labels need a single column, found {}", m.dim()),
        ));
    }
    m.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(HarnessError::parse(path, format!("row {}", i + 1), format!("label {v} is not a non-negative integer")))
            }
        })
        .collect()
}
