//! Point-set files.
//!
//! Two formats are understood:
//!
//! * CSV: one point per row, no header, `#` starts a comment line. With
//!   `weighted` the first column is the point's weight, otherwise every
//!   weight is 1.
//! * Binary: the magic bytes `EMDQ1`, then `n` and `d` as little-endian
//!   `u32`, then `n·d` little-endian `f64` coordinates row by row, then `n`
//!   little-endian `f64` weights.
//!
//! [`read_point_set`] picks the format from the file's leading bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{EmdError, Result};
use crate::geometry::{PointSource, WeightedPointSet};

pub const MAGIC: &[u8; 5] = b"EMDQ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv { weighted: bool },
    Binary,
}

impl Format {
    /// CSV for a `.csv` extension, binary otherwise.
    pub fn from_path(path: &Path, weighted: bool) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv { weighted },
            _ => Format::Binary,
        }
    }
}

/// Reads a point set, detecting binary files by their magic bytes.
/// `weighted` only affects CSV input.
pub fn read_point_set(path: &Path, weighted: bool) -> Result<WeightedPointSet> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| EmdError::Io(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        parse_csv(&bytes[..], weighted)
    }
}

pub fn write_point_set(path: &Path, set: &WeightedPointSet, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| EmdError::Io(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv { weighted } => write_csv(&mut out, set, weighted)?,
        Format::Binary => out.write_all(&encode_binary(set))?,
    }
    out.flush()?;
    Ok(())
}

pub fn parse_csv<R: Read>(input: R, weighted: bool) -> Result<WeightedPointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut dim = None;
    for record in reader.records() {
        let record = record.map_err(|e| EmdError::Parse(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut values = Vec::with_capacity(record.len());
        for field in &record {
            let v: f64 = field
                .parse()
                .map_err(|_| EmdError::Parse(format!("line {line}: not a number: {field:?}")))?;
            values.push(v);
        }
        let (w, point) = if weighted {
            match values.split_first() {
                Some((w, rest)) if !rest.is_empty() => (*w, rest),
                _ => return Err(EmdError::Parse(format!("line {line}: weighted row needs a weight and coordinates"))),
            }
        } else {
            (1.0, &values[..])
        };
        match dim {
            None => dim = Some(point.len()),
            Some(d) if d != point.len() => {
                return Err(EmdError::Parse(format!("line {line}: expected {d} coordinates, found {}", point.len())))
            }
            _ => {}
        }
        coords.extend_from_slice(point);
        weights.push(w);
    }
    let dim = dim.ok_or(EmdError::EmptySet)?;
    WeightedPointSet::new(coords, dim, weights)
}

pub fn write_csv<W: Write>(out: W, set: &WeightedPointSet, weighted: bool) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let mut row = Vec::with_capacity(set.dim() + 1);
    for (i, p) in set.points().enumerate() {
        row.clear();
        if weighted {
            row.push(set.weight(i).to_string());
        }
        row.extend(p.iter().map(|x| x.to_string()));
        writer.write_record(&row).map_err(|e| EmdError::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn encode_binary(set: &WeightedPointSet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(13 + 8 * (set.coords().len() + set.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(set.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for x in set.coords().iter().chain(set.weights()) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf
}

pub fn decode_binary(bytes: &[u8]) -> Result<WeightedPointSet> {
    let body = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| EmdError::Parse("missing EMDQ1 magic".into()))?;
    if body.len() < 8 {
        return Err(EmdError::Parse("truncated header".into()));
    }
    let n = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(body[4..8].try_into().unwrap()) as usize;
    let floats = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(n))
        .ok_or_else(|| EmdError::Parse("header sizes overflow".into()))?;
    let payload = &body[8..];
    if payload.len() != floats * 8 {
        return Err(EmdError::Parse(format!(
            "expected {} payload bytes for n={n}, d={d}, found {}",
            floats * 8,
            payload.len()
        )));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let coords: Vec<f64> = values.by_ref().take(n * d).collect();
    let weights: Vec<f64> = values.collect();
    WeightedPointSet::new(coords, d, weights)
}
