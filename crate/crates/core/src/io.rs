//! Flat-file formats: weight vectors, bid samples and two-column tables.
//!
//! Numbers are parsed with Rust's locale-free float parser. Blank lines and
//! lines starting with `#` are ignored, and a single non-numeric header line
//! is allowed in column formats.

use std::path::Path;

use crate::alloc::PositionWeights;
use crate::{Error, Result};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value {s:?}")));
    }
    Ok(v)
}

/// A JSON array of numbers, or one number per line.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    if text.trim_start().starts_with('[') {
        let v: Vec<f64> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        return Ok(v);
    }
    let mut out = Vec::new();
    for (idx, (line, l)) in data_lines(text).enumerate() {
        let field = l.split(',').next().unwrap_or(l);
        match parse_f64(field, line) {
            Ok(v) => out.push(v),
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn parse_weights(text: &str) -> Result<PositionWeights> {
    PositionWeights::new(parse_numbers(text)?)
}

pub fn read_weights(path: &Path) -> Result<PositionWeights> {
    parse_weights(&read(path)?)
}

/// Bids from a newline-delimited or single-column CSV file, sorted ascending.
pub fn parse_bids(text: &str) -> Result<Vec<f64>> {
    let mut bids = parse_numbers(text)?;
    if bids.iter().any(|b| *b < 0.0) {
        return Err(Error::Parse("bids must be non-negative".into()));
    }
    bids.sort_by(f64::total_cmp);
    Ok(bids)
}

pub fn read_bids(path: &Path) -> Result<Vec<f64>> {
    parse_bids(&read(path)?)
}

pub fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    parse_numbers(&read(path)?)
}

/// Two numeric columns separated by a comma or whitespace.
pub fn parse_two_columns(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (idx, (line, l)) in data_lines(text).enumerate() {
        let fields: Vec<&str> = l.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!("line {line}: expected two columns, got {}", fields.len())));
        }
        match (parse_f64(fields[0], line), parse_f64(fields[1], line)) {
            (Ok(x), Ok(y)) => {
                a.push(x);
                b.push(y);
            }
            _ if idx == 0 => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok((a, b))
}
