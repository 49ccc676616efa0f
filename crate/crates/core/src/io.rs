//! MSRM binary matrix files.
//!
//! Layout: magic `MSRM`, `u32` version, `u64` rows, `u64` cols, then
//! `rows·cols` little-endian `f64` values in column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSRM";
pub const VERSION: u32 = 1;

pub fn write_msrm_to<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for x in m.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_msrm_from<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
    let mut head = [0u8; 24];
    let got = read_full(&mut r, &mut head)?;
    if got < 4 || &head[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if got < head.len() {
        return Err(Error::Truncated { expected: head.len() as u64, found: got as u64 });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(head[16..24].try_into().expect("8 bytes"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or(Error::Truncated { expected: u64::MAX, found: 0 })?;
    let mut payload = Vec::new();
    r.take(expected).read_to_end(&mut payload)?;
    if payload.len() as u64 != expected {
        return Err(Error::Truncated { expected, found: payload.len() as u64 });
    }
    let data: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(DMatrix::from_vec(rows as usize, cols as usize, data))
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..])? {
            0 => break,
            k => got += k,
        }
    }
    Ok(got)
}

pub fn write_msrm(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_msrm_to(BufWriter::new(File::create(path)?), m)
}

pub fn read_msrm(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    read_msrm_from(BufReader::new(File::open(path)?))
}
