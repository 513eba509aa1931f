//! Matrix files: CSV rows of decimal floats, or the `DPM1` binary layout
//! (magic, `u64` rows, `u64` cols, row-major `f64` entries, all little-endian).

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"DPM1";
const HEADER_LEN: usize = 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.csv` selects CSV; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("binary matrix malformed at byte offset {offset}: {reason}")]
    Binary { offset: usize, reason: String },
    #[error("CSV matrix malformed at row {row}: {reason}")]
    Csv { row: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses either format; binary is recognised by its magic bytes.
pub fn decode(bytes: &[u8]) -> Result<DenseMatrix, MatrixFileError> {
    if bytes.starts_with(MAGIC) {
        decode_binary(bytes)
    } else {
        decode_csv(bytes)
    }
}

pub fn read(path: &Path) -> Result<DenseMatrix, MatrixFileError> {
    decode(&std::fs::read(path)?)
}

pub fn encode(matrix: &DenseMatrix, format: MatrixFormat) -> Vec<u8> {
    match format {
        MatrixFormat::Csv => encode_csv(matrix).into_bytes(),
        MatrixFormat::Binary => encode_binary(matrix),
    }
}

pub fn encode_binary(matrix: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * matrix.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.cols() as u64).to_le_bytes());
    for x in matrix.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Shortest round-trip decimal representation of every entry.
pub fn encode_csv(matrix: &DenseMatrix) -> String {
    let mut out = String::new();
    for r in 0..matrix.rows() {
        for (c, x) in matrix.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{x:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn binary_err(offset: usize, reason: impl Into<String>) -> MatrixFileError {
    MatrixFileError::Binary { offset, reason: reason.into() }
}

pub fn decode_binary(bytes: &[u8]) -> Result<DenseMatrix, MatrixFileError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(binary_err(0, "missing DPM1 magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(binary_err(bytes.len(), "truncated header"));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (read_u64(4), read_u64(12));
    if rows == 0 || cols == 0 {
        return Err(binary_err(4, format!("dimensions must be positive, got {rows}x{cols}")));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .filter(|c| c.checked_mul(8).is_some())
        .ok_or_else(|| binary_err(4, format!("dimensions {rows}x{cols} overflow")))?;
    let expected = HEADER_LEN + 8 * count;
    if bytes.len() != expected {
        let offset = bytes.len().min(expected);
        return Err(binary_err(
            offset,
            format!("expected {expected} bytes for {rows}x{cols}, found {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let at = HEADER_LEN + 8 * i;
        let x = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        if !x.is_finite() {
            return Err(binary_err(at, format!("non-finite entry {x}")));
        }
        data.push(x);
    }
    Ok(DenseMatrix::from_parts(rows as usize, cols as usize, data))
}

/// Rows are 1-based in error messages. Blank lines are skipped.
pub fn decode_csv(bytes: &[u8]) -> Result<DenseMatrix, MatrixFileError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let row = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        MatrixFileError::Csv { row, reason: "invalid UTF-8".into() }
    })?;
    let mut cols = None;
    let mut rows = 0;
    let mut data = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let x: f64 = field.trim().parse().map_err(|_| MatrixFileError::Csv {
                row,
                reason: format!("cannot parse `{}` as a number", field.trim()),
            })?;
            if !x.is_finite() {
                return Err(MatrixFileError::Csv { row, reason: format!("non-finite entry {x}") });
            }
            data.push(x);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(MatrixFileError::Csv {
                    row,
                    reason: format!("expected {c} columns, found {count}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or(MatrixFileError::Csv { row: 1, reason: "no data rows".into() })?;
    Ok(DenseMatrix::from_parts(rows, cols, data))
}
