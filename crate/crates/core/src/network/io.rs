//! Plain-text graph and matrix formats.
//!
//! Edge list: one `i j` pair per line, 0-indexed. Dense matrix: `n` lines of
//! `n` whitespace- or comma-separated entries, row-major. Both formats skip
//! blank lines and `#` comments. Matrix entries may be decimals or `p/q`
//! fractions.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

/// Parse an edge list. Returns the pairs and the sensor count they imply.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected two sensor indices, found {:?}", content),
            });
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid sensor index {s:?}"),
            })
        };
        let (a, b) = (parse(fields[0])?, parse(fields[1])?);
        n = n.max(a + 1).max(b + 1);
        edges.push((a, b));
    }
    Ok((n, edges))
}

pub fn write_edge_list(edges: impl IntoIterator<Item = (usize, usize)>) -> String {
    let mut out = String::new();
    for (a, b) in edges {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

pub fn parse_entry(token: &str) -> std::result::Result<f64, String> {
    let value = match token.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("invalid numerator in {token:?}"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("invalid denominator in {token:?}"))?;
            if q == 0.0 {
                return Err(format!("zero denominator in {token:?}"));
            }
            p / q
        }
        None => token.parse().map_err(|_| format!("invalid number {token:?}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("non-finite entry {token:?}"))
    }
}

pub fn parse_dense_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut last_line = 0;
    for (line, content) in content_lines(text) {
        last_line = line;
        let row = content
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| parse_entry(t).map_err(|message| Error::Parse { line, message }))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("row has {} entries, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse {
            line: last_line,
            message: "matrix is empty".into(),
        });
    }
    if rows[0].len() != n {
        return Err(Error::Parse {
            line: last_line,
            message: format!("matrix has {n} rows of {} entries; it must be square", rows[0].len()),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Row-major text with shortest round-trip decimal formatting.
pub fn write_dense_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
