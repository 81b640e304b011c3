//! Plain-text matrix format.
//!
//! First line: `rows cols`. Then one whitespace-separated row per line.
//! Output carries 17 significant digits so values round-trip bit for bit.
//! Vectors are stored as n x 1 matrices.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn format_matrix(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", a[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty matrix file".into() })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected 'rows cols', got {header:?}"),
        });
    }
    let rows: usize = dims[0].parse().map_err(|_| Error::Parse {
        line: 1,
        msg: format!("bad row count {:?}", dims[0]),
    })?;
    let cols: usize = dims[1].parse().map_err(|_| Error::Parse {
        line: 1,
        msg: format!("bad column count {:?}", dims[1]),
    })?;

    let mut entries = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("bad number {tok:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {cols} entries, got {}", row.len()),
            });
        }
        entries.extend_from_slice(&row);
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {rows} rows, got {seen_rows}"),
        });
    }
    if !entries.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("matrix file"));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &entries))
}

pub fn write_matrix_file(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix(a))?;
    Ok(())
}

pub fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text)
}

/// Read an n x 1 matrix as a vector.
pub fn read_vector_file(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_file(path)?;
    if m.ncols() != 1 {
        return Err(Error::Dimension(format!(
            "expected a column vector (n x 1), got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(DVector::from_column_slice(m.column(0).as_slice()))
}

pub fn write_vector_file(path: &Path, v: &DVector<f64>) -> Result<()> {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    write_matrix_file(path, &m)
}
