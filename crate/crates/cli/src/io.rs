//! Input parsing (counts, samples, ASCII PGM) and CSV/JSON output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use cbpois::zoo::ImageGrid;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Format(String),
}

fn line_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line {
        line,
        message: message.into(),
    }
}

/// Newline-delimited nonnegative integers; blank lines are skipped.
pub fn parse_counts(text: &str) -> Result<Vec<u64>, ParseError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let v = s.parse::<u64>().map_err(|_| {
            line_err(
                k + 1,
                format!("expected a nonnegative integer, found `{s}`"),
            )
        })?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(ParseError::Format("no counts found".into()));
    }
    Ok(out)
}

/// One or two whitespace-separated reals per line, the same number on every
/// line; blank lines and `#` comments are skipped.
pub fn parse_samples(text: &str) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let row = s
            .split_whitespace()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(line_err(
                    k + 1,
                    format!("expected a finite real, found `{t}`"),
                )),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if row.len() > 2 {
            return Err(line_err(
                k + 1,
                format!("expected 1 or 2 values, found {}", row.len()),
            ));
        }
        if let Some(first) = out.first() {
            if first.len() != row.len() {
                return Err(line_err(
                    k + 1,
                    format!("expected {} values like the first line", first.len()),
                ));
            }
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(ParseError::Format("no samples found".into()));
    }
    Ok(out)
}

/// ASCII PGM (`P2`) with arbitrary maxval; pixel values are the counts.
pub fn parse_pgm(text: &str) -> Result<ImageGrid, ParseError> {
    let mut tokens = text
        .lines()
        .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace());
    let magic = tokens
        .next()
        .ok_or_else(|| ParseError::Format("empty image file".into()))?;
    if magic != "P2" {
        return Err(ParseError::Format(format!(
            "expected magic `P2`, found `{magic}`"
        )));
    }
    let mut header = |what: &str| -> Result<u64, ParseError> {
        let t = tokens
            .next()
            .ok_or_else(|| ParseError::Format(format!("missing {what} in PGM header")))?;
        t.parse::<u64>()
            .map_err(|_| ParseError::Format(format!("bad {what} `{t}` in PGM header")))
    };
    let width = header("width")? as usize;
    let height = header("height")? as usize;
    let maxval = header("maxval")?;
    if width == 0 || height == 0 {
        return Err(ParseError::Format("image has zero size".into()));
    }
    let mut counts = Vec::with_capacity(width * height);
    for t in tokens {
        let v = t.parse::<u64>().map_err(|_| {
            ParseError::Format(format!("bad pixel `{t}` at index {}", counts.len()))
        })?;
        if v > maxval {
            return Err(ParseError::Format(format!(
                "pixel {v} exceeds maxval {maxval}"
            )));
        }
        counts.push(v);
    }
    if counts.len() != width * height {
        return Err(ParseError::Format(format!(
            "expected {} pixels, found {}",
            width * height,
            counts.len()
        )));
    }
    ImageGrid::new(width, height, counts).map_err(|e| ParseError::Format(e.to_string()))
}

/// Renders values rounded to the nearest integer (negatives clipped at 0).
pub fn format_pgm(width: usize, height: usize, values: &[f64]) -> String {
    let px: Vec<u64> = values.iter().map(|v| v.max(0.0).round() as u64).collect();
    let maxval = px.iter().copied().max().unwrap_or(0).max(1);
    let mut out = format!("P2\n{width} {height}\n{maxval}\n");
    for row in px.chunks(width.max(1)).take(height) {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_counts(path: &Path) -> anyhow::Result<Vec<u64>> {
    parse_counts(&read_text(path)?).with_context(|| format!("parsing counts in {}", path.display()))
}

pub fn read_samples(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    parse_samples(&read_text(path)?)
        .with_context(|| format!("parsing samples in {}", path.display()))
}

pub fn read_pgm(path: &Path) -> anyhow::Result<ImageGrid> {
    parse_pgm(&read_text(path)?).with_context(|| format!("parsing image {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A header plus string records, as RFC-4180 CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_to<W: Write>(&self, w: W) -> anyhow::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.header)?;
        for r in &self.rows {
            wtr.write_record(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> anyhow::Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.write_to(BufWriter::new(f))
    }
}

/// Shortest round-trip representation; empty for NaN (missing).
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
