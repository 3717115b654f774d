//! Headerless CSV sample files: one observation per line, one column per
//! coordinate.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use swd_core::SampleMatrix;

use crate::error::{Error, Result};

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_samples_from(file, path)
}

pub fn read_samples_from<R: std::io::Read>(reader: R, path: &Path) -> Result<SampleMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(reader);
    let mut data = Vec::new();
    let mut d: Option<usize> = None;
    let mut n = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse { path: path.into(), line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match d {
            None => d = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: format!("expected {d} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("column {}: cannot parse {field:?} as a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: format!("column {}: non-finite value {field}", col + 1),
                });
            }
            data.push(v);
        }
        n += 1;
    }
    let d = d.ok_or_else(|| Error::Input { path: path.into(), message: "no observations".into() })?;
    SampleMatrix::new(data, n, d).map_err(|e| Error::Input { path: path.into(), message: e.to_string() })
}

/// Writes a sample in the format [`read_samples`] accepts. Values use the
/// shortest representation that parses back to the same bits.
pub fn write_samples(path: &Path, samples: &SampleMatrix) -> Result<()> {
    let mut out = String::with_capacity(samples.n() * samples.d() * 20);
    for row in samples.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
