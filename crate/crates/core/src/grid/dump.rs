use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"CGRID1";

/// Writes `CGRID1`, the dimensions as little-endian `u64`, then the values
/// as little-endian `f64` (row-major, normal axis slowest).
pub fn write_cgrid(w: &mut impl Write, dims: &[usize], values: &[f64]) -> Result<()> {
    let expected: usize = dims.iter().product();
    if expected != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "dims give {expected} values, got {}",
            values.len()
        )));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(dims.len() as u64).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_cgrid(r: &mut impl Read) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a CGRID1 stream".into()));
    }
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let rank = u64::from_le_bytes(b) as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        r.read_exact(&mut b)?;
        dims.push(u64::from_le_bytes(b) as usize);
    }
    let n: usize = dims.iter().product();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b)?;
        values.push(f64::from_le_bytes(b));
    }
    Ok((dims, values))
}
