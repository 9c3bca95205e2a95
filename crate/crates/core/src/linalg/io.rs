//! Plain-text matrix format: a header line `m n`, then `m` lines of `n`
//! whitespace-separated decimal reals.

use std::io::{BufRead, Write};

use super::Matrix;
use crate::error::{Error, Result};

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad dimension `{t}` in header")))
        })
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be `m n`, got `{header}`")));
    };

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::Parse(format!("line {}: bad number `{tok}`", lineno + 1))
            })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "line {}: expected {cols} values, got {}",
                lineno + 1,
                data.len() - before
            )));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse(format!("expected {rows} rows, got {seen}")));
    }
    Matrix::new(rows, cols, data)
}

pub fn read_matrix<R: BufRead>(mut reader: R) -> Result<Matrix> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut reader, &mut text)?;
    parse_matrix(&text)
}

/// Writes with shortest round-trip decimal formatting.
pub fn write_matrix<W: Write>(mut out: W, x: &Matrix) -> Result<()> {
    writeln!(out, "{} {}", x.rows(), x.cols())?;
    for i in 0..x.rows() {
        let line: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let x = Matrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0) - 1e-9);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &x).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("3 2\n"));
        assert_eq!(parse_matrix(&text).unwrap(), x);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2 2\n1 2\n3\n").is_err());
        assert!(parse_matrix("2 2\n1 2\n").is_err());
        assert!(parse_matrix("1 1\nabc\n").is_err());
        assert!(matches!(parse_matrix("1 1\nNaN\n"), Err(Error::InputDomain(_))));
    }
}
