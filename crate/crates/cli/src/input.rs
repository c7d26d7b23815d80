//! Plain-text `(H, y)` files for `detect`.
//!
//! ```text
//! 2 2
//! 1 0
//! 0 1
//! y:
//! 1.2 -0.4
//! ```
//!
//! The first line holds `rows cols`; the matrix follows in row-major order,
//! then a `y:` marker and `rows` observations. Numbers may be split across
//! lines freely. Blank lines and `#` comments are skipped.

use std::path::Path;

use ftn_soav::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub fn read_system(path: &Path) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_system(&text, path)
}

pub fn parse_system(text: &str, path: &Path) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(header_line, format!("invalid dimension '{t}'"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(err(header_line, format!("expected 'rows cols', found '{header}'")));
    };
    if rows == 0 || cols == 0 {
        return Err(err(header_line, "dimensions must be positive".into()));
    }

    let mut h_vals = Vec::with_capacity(rows * cols);
    let mut y_vals = Vec::with_capacity(rows);
    let mut in_y = false;
    let mut last_line = header_line;
    for (line_no, line) in lines {
        last_line = line_no;
        let mut rest = line;
        if let Some(after) = line.strip_prefix("y:") {
            if in_y {
                return Err(err(line_no, "second 'y:' marker".into()));
            }
            if h_vals.len() != rows * cols {
                return Err(err(
                    line_no,
                    format!("matrix has {} values, expected {}", h_vals.len(), rows * cols),
                ));
            }
            in_y = true;
            rest = after;
        }
        let target = if in_y { &mut y_vals } else { &mut h_vals };
        for tok in rest.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| err(line_no, format!("invalid number '{tok}'")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite value '{tok}'")));
            }
            target.push(v);
        }
        let limit = if in_y { rows } else { rows * cols };
        if target.len() > limit {
            let what = if in_y { "observation vector" } else { "matrix" };
            return Err(err(line_no, format!("too many values for the {what} (expected {limit})")));
        }
    }
    if !in_y {
        return Err(err(last_line, "missing 'y:' marker".into()));
    }
    if y_vals.len() != rows {
        return Err(err(last_line, format!("y has {} values, expected {rows}", y_vals.len())));
    }
    Ok((DMatrix::from_row_slice(rows, cols, &h_vals), DVector::from_vec(y_vals)))
}
