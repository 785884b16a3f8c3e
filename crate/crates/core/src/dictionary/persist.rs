//! Binary model files and CSV trace export.
//!
//! Layout, all integers and floats little-endian:
//! `b"SPKD1"`, `u32 d`, `u32 M`, `u8 flags` (bit 0: classifier, bit 1:
//! transform), then `u32` row counts for each present block, then the
//! dictionary, classifier and transform as row-major `f64`.

use std::io::{Read, Write};

use super::LearnedDictionary;
use crate::error::{Result, SparseError};
use crate::linalg::Matrix;
use crate::problem::Dictionary;

const MAGIC: &[u8; 5] = b"SPKD1";
const HAS_CLASSIFIER: u8 = 1;
const HAS_TRANSFORM: u8 = 2;

fn dim_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| SparseError::Format(format!("{what} {v} exceeds u32")))
}

fn write_rows<W: Write>(m: &Matrix, out: &mut W) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Writes a model. The objective trace is not stored; see [`write_trace_csv`].
pub fn save_model<W: Write>(model: &LearnedDictionary, mut out: W) -> Result<()> {
    let atoms = model.dict.atoms();
    let m = atoms.ncols();
    for (block, name) in [(&model.classifier, "classifier"), (&model.transform, "transform")] {
        if let Some(b) = block {
            if b.ncols() != m {
                return Err(SparseError::DimensionMismatch(format!("{name} has {} columns, expected {m}", b.ncols())));
            }
        }
    }
    let mut flags = 0u8;
    if model.classifier.is_some() {
        flags |= HAS_CLASSIFIER;
    }
    if model.transform.is_some() {
        flags |= HAS_TRANSFORM;
    }
    out.write_all(MAGIC)?;
    out.write_all(&dim_u32(atoms.nrows(), "dimension")?.to_le_bytes())?;
    out.write_all(&dim_u32(m, "atom count")?.to_le_bytes())?;
    out.write_all(&[flags])?;
    for b in [&model.classifier, &model.transform].into_iter().flatten() {
        out.write_all(&dim_u32(b.nrows(), "row count")?.to_le_bytes())?;
    }
    write_rows(atoms, &mut out)?;
    for b in [&model.classifier, &model.transform].into_iter().flatten() {
        write_rows(b, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => SparseError::Format("model file is truncated".into()),
        _ => SparseError::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(input: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(read_exact::<R, 4>(input)?) as usize)
}

fn read_rows<R: Read>(input: &mut R, rows: usize, cols: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = f64::from_le_bytes(read_exact::<R, 8>(input)?);
        }
    }
    Ok(m)
}

/// Reads a model written by [`save_model`]. Trailing bytes are rejected.
pub fn load_model<R: Read>(mut input: R) -> Result<LearnedDictionary> {
    if &read_exact::<R, 5>(&mut input)? != MAGIC {
        return Err(SparseError::Format("bad magic, expected SPKD1".into()));
    }
    let d = read_u32(&mut input)?;
    let m = read_u32(&mut input)?;
    let [flags] = read_exact::<R, 1>(&mut input)?;
    if flags & !(HAS_CLASSIFIER | HAS_TRANSFORM) != 0 {
        return Err(SparseError::Format(format!("unknown flag bits {flags:#04x}")));
    }
    if d == 0 || m == 0 {
        return Err(SparseError::Format("empty dictionary".into()));
    }
    let c_rows = if flags & HAS_CLASSIFIER != 0 { Some(read_u32(&mut input)?) } else { None };
    let a_rows = if flags & HAS_TRANSFORM != 0 { Some(read_u32(&mut input)?) } else { None };
    let atoms = read_rows(&mut input, d, m)?;
    let classifier = c_rows.map(|r| read_rows(&mut input, r, m)).transpose()?;
    let transform = a_rows.map(|r| read_rows(&mut input, r, m)).transpose()?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(SparseError::Format("trailing bytes after model".into()));
    }
    let dict = Dictionary::new(atoms).map_err(|e| SparseError::Format(e.to_string()))?;
    Ok(LearnedDictionary { dict, classifier, transform, objective_trace: Vec::new() })
}

/// CSV with header `sweep,objective`, one row per trace entry.
pub fn write_trace_csv<W: Write>(trace: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "sweep,objective")?;
    for (i, v) in trace.iter().enumerate() {
        writeln!(out, "{i},{v:e}")?;
    }
    Ok(())
}
