//! Plain-text matrix fixtures.
//!
//! ```text
//! rows cols
//! a00 a01 ...
//! ...
//! ```
//! Entries are written with 17 digits after the point in scientific
//! notation, which round-trips `f64` exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::DenseMatrix;

pub fn format_matrix<T: Scalar>(m: &DenseMatrix<T>) -> String {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v:.17e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_matrix<T: Scalar, W: Write>(m: &DenseMatrix<T>, mut out: W) -> Result<()> {
    out.write_all(format_matrix(m).as_bytes())?;
    Ok(())
}

pub fn parse_matrix<T: Scalar>(text: &str) -> Result<DenseMatrix<T>> {
    read_matrix(text.as_bytes())
}

pub fn read_matrix<T: Scalar, R: BufRead>(input: R) -> Result<DenseMatrix<T>> {
    let mut lines = input.lines().enumerate();
    let (rows, cols) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(parse_err(1, "missing header line \"rows cols\""));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let dims: Vec<&str> = line.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(parse_err(idx + 1, "header must be \"rows cols\""));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| parse_err(idx + 1, format!("invalid dimension {s:?}")))
        };
        break (parse_dim(dims[0])?, parse_dim(dims[1])?);
    };

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        if seen_rows == rows {
            return Err(parse_err(lineno, format!("expected {rows} rows, found more")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: T = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid scalar {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite scalar {tok:?}")));
            }
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(parse_err(
                lineno,
                format!("expected {cols} values, found {}", data.len() - before),
            ));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(parse_err(
            seen_rows + 2,
            format!("expected {rows} rows, found {seen_rows}"),
        ));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn load_matrix<T: Scalar>(path: &Path) -> Result<DenseMatrix<T>> {
    let file = std::fs::File::open(path)?;
    read_matrix(std::io::BufReader::new(file))
}

pub fn save_matrix<T: Scalar>(m: &DenseMatrix<T>, path: &Path) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
