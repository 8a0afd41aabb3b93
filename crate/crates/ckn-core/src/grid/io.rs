//! Field serialization: a plain-text CSV form for inspection and a
//! compact binary form for lossless round trips.
//!
//! CSV layout: one `# schema: s,omega,value` header line, then one row
//! per node in row-major order (s outer, angular inner), full f64
//! precision.
//!
//! Binary layout (little-endian): the 4-byte magic `CKN1`, `n_s` and
//! `n_omega` as u64, then `n_s * n_omega` f64 values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CylinderGrid, Field};
use crate::error::{CknError, Result};

const MAGIC: &[u8; 4] = b"CKN1";

pub fn write_field_csv<W: Write>(out: &mut W, grid: &CylinderGrid<f64>, f: &Field<f64>) -> Result<()> {
    f.matches(grid)?;
    writeln!(out, "# schema: s,omega,value")?;
    for i in 0..f.n_s {
        for j in 0..f.n_omega {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e}",
                grid.s[i],
                grid.angular.nodes[j],
                f.at(i, j)
            )?;
        }
    }
    Ok(())
}

pub fn write_field_csv_path(path: &Path, grid: &CylinderGrid<f64>, f: &Field<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_field_csv(&mut out, grid, f)?;
    out.flush()?;
    Ok(())
}

pub fn write_field_binary<W: Write>(out: &mut W, f: &Field<f64>) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(f.n_s as u64).to_le_bytes())?;
    out.write_all(&(f.n_omega as u64).to_le_bytes())?;
    for &x in &f.data {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_field_binary_path(path: &Path, f: &Field<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_field_binary(&mut out, f)?;
    out.flush()?;
    Ok(())
}

pub fn read_field_binary<R: Read>(input: &mut R) -> Result<Field<f64>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CknError::shape(format!(
            "bad magic {magic:?}; not a field file"
        )));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n_s = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let n_omega = u64::from_le_bytes(word) as usize;
    let count = n_s
        .checked_mul(n_omega)
        .filter(|&c| c > 0 && c <= (1 << 32))
        .ok_or_else(|| {
            CknError::shape(format!("implausible field shape {n_s} x {n_omega}"))
        })?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    // Must be at EOF now.
    let mut extra = [0u8; 1];
    match input.read(&mut extra)? {
        0 => Ok(Field { n_s, n_omega, data }),
        _ => Err(CknError::shape("trailing bytes after field data")),
    }
}

pub fn read_field_binary_path(path: &Path) -> Result<Field<f64>> {
    read_field_binary(&mut BufReader::new(File::open(path)?))
}
