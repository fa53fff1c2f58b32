//! File formats: correspondence CSV, fundamental-matrix JSON and the
//! record inputs of the metrics summary.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{Matrix3, Point2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epipolar::{normalize_f, FundamentalMatrix};
use crate::metrics::EvalRecord;
use crate::robust::Correspondence;
use crate::synth::SweepRow;

pub const CORRESPONDENCE_HEADER: [&str; 4] = ["x1", "y1", "x2", "y2"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid matrix file: {0}")]
    Matrix(String),
}

fn parse_error(line: u64, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

fn csv_error(e: csv::Error) -> FormatError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FormatError::Io(io),
        kind => parse_error(line, format!("{kind:?}")),
    }
}

/// Reads `x1,y1,x2,y2` rows. Blank lines are skipped; errors carry the
/// physical line number.
pub fn read_correspondences<R: Read>(input: R) -> Result<Vec<Correspondence>, FormatError> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let n = i as u64 + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if !header_seen {
            if fields != CORRESPONDENCE_HEADER {
                return Err(parse_error(n, format!("expected header x1,y1,x2,y2, found {text:?}")));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_error(n, format!("expected 4 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 4];
        for (k, field) in fields.iter().enumerate() {
            v[k] = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_error(n, format!("{}: not a finite number: {field:?}", CORRESPONDENCE_HEADER[k])))?;
        }
        out.push(Correspondence::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3])));
    }
    if !header_seen {
        return Err(parse_error(1, "missing header x1,y1,x2,y2"));
    }
    Ok(out)
}

pub fn write_correspondences<W: Write>(corr: &[Correspondence], out: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CORRESPONDENCE_HEADER).map_err(csv_error)?;
    for c in corr {
        w.serialize([c.x1.x, c.x1.y, c.x2.x, c.x2.y]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: f64,
    pub height: f64,
}

impl ImageSize {
    pub fn as_tuple(&self) -> (f64, f64) {
        (self.width, self.height)
    }
}

/// `{"F": [9 row-major], "image1": {...}, "image2": {...}}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(rename = "F")]
    pub f: [f64; 9],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image1: Option<ImageSize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image2: Option<ImageSize>,
}

impl MatrixFile {
    pub fn new(f: &FundamentalMatrix) -> Self {
        Self { f: f.as_row_major(), image1: None, image2: None }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.f)
    }

    /// Both image sizes, if present.
    pub fn image_sizes(&self) -> Option<((f64, f64), (f64, f64))> {
        Some((self.image1?.as_tuple(), self.image2?.as_tuple()))
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if self.f.iter().any(|x| !x.is_finite()) {
            return Err(FormatError::Matrix("F has non-finite entries".into()));
        }
        if self.f.iter().all(|x| *x == 0.0) {
            return Err(FormatError::Matrix("F is zero".into()));
        }
        for s in [self.image1, self.image2].into_iter().flatten() {
            if !(s.width > 0.0 && s.height > 0.0 && s.width.is_finite() && s.height.is_finite()) {
                return Err(FormatError::Matrix("image sizes must be positive".into()));
            }
        }
        Ok(())
    }

    /// Canonical fundamental matrix of the stored entries.
    pub fn fundamental(&self) -> crate::Result<FundamentalMatrix> {
        normalize_f(&self.matrix())
    }
}

pub fn read_matrix_file<R: Read>(input: R) -> Result<MatrixFile, FormatError> {
    let m: MatrixFile = serde_json::from_reader(input).map_err(|e| parse_error(e.line() as u64, e.to_string()))?;
    m.validate()?;
    Ok(m)
}

pub fn write_matrix_file<W: Write>(m: &MatrixFile, mut out: W) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut out, m).map_err(|e| FormatError::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

/// Sweep rows as metric records, grouped by swept value and estimator.
/// Only rows with status `ok` count as successes.
pub fn records_from_rows(rows: &[SweepRow]) -> Vec<EvalRecord> {
    rows.iter()
        .map(|r| EvalRecord {
            group: format!("{}={}/{}", r.sweep_param, r.value, r.estimator),
            f_err: vec![r.f1_err, r.f2_err],
            p_err: None,
            success: r.status == "ok",
        })
        .collect()
}

pub fn read_sweep_rows<R: Read>(input: R) -> Result<Vec<SweepRow>, FormatError> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|r| r.map_err(csv_error)).collect()
}

/// Metric records from either a sweep CSV or a JSON array of records; the
/// first non-blank character decides.
pub fn read_eval_records<R: Read>(mut input: R) -> Result<Vec<EvalRecord>, FormatError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| parse_error(e.line() as u64, e.to_string()))
    } else if text.trim().is_empty() {
        Ok(Vec::new())
    } else {
        Ok(records_from_rows(&read_sweep_rows(text.as_bytes())?))
    }
}
