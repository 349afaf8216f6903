//! Small CSV helpers shared by potentials, initial data, and persistence.
//!
//! All floats are written with `Display`, which in Rust produces the
//! shortest string that round-trips exactly; reloading a file therefore
//! reproduces the original bits.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected} numeric columns, got `{text}`")]
    BadRow {
        path: String,
        line: usize,
        expected: usize,
        text: String,
    },
    #[error("{path}: no data rows")]
    Empty { path: String },
}

/// Parses a two-column CSV of `(x, value)` rows. `#`-comment lines are
/// skipped and a single non-numeric header row is tolerated.
pub fn parse_two_column(text: &str, path: &str) -> Result<Vec<(f64, f64)>, CsvError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let a = parts.next().unwrap_or("");
        let b = parts.next().unwrap_or("");
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(v)) => rows.push((x, v)),
            _ if rows.is_empty() && i == 0 => continue, // header
            _ => {
                return Err(CsvError::BadRow {
                    path: path.to_string(),
                    line: i + 1,
                    expected: 2,
                    text: raw.to_string(),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(CsvError::Empty {
            path: path.to_string(),
        });
    }
    Ok(rows)
}

pub fn read_two_column(path: &Path) -> Result<Vec<(f64, f64)>, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_two_column(&text, &path.display().to_string())
}

/// Renders rows of floats as CSV with a header line.
pub fn format_table(header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", v);
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CsvError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CsvError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_header_and_comments() {
        let text = "x,value\n# comment\n0.5, 1.25\n-1e-3,2\n";
        let rows = parse_two_column(text, "mem").unwrap();
        assert_eq!(rows, vec![(0.5, 1.25), (-1e-3, 2.0)]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_two_column("0.5,oops\n", "mem").is_err());
        assert!(parse_two_column("", "mem").is_err());
    }

    #[test]
    fn float_round_trip_is_exact() {
        let vals = [1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, 98765.4321];
        for v in vals {
            let s = format!("{}", v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
