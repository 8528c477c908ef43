//! Binary field files.
//!
//! Layout, all little-endian: magic `EULF`, format version `u32`, `n1 u32`,
//! `n2 u32`, component count `u32`, time `f64`, then each component
//! (`u` then `v`) as `n1 * n2` row-major `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{GridSpec, ScalarField, VectorField};

pub const MAGIC: [u8; 4] = *b"EULF";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 8;

pub fn encode_field(field: &VectorField, time: f64) -> Vec<u8> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.n1() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.n2() as u32).to_le_bytes());
    buf.extend_from_slice(&2u32.to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    for comp in [field.u(), field.v()] {
        for x in comp.values() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf
}

/// Decodes a field; `origin` is only used in error messages.
pub fn decode_field(bytes: &[u8], origin: &Path) -> Result<(VectorField, f64)> {
    let bad = |reason: String| Error::format(origin, reason);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if bytes[0..4] != MAGIC {
        return Err(bad("bad magic, not a field file".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(bad(format!(
            "format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let (n1, n2, ncomp) = (word(8) as usize, word(12) as usize, word(16));
    if ncomp != 2 {
        return Err(bad(format!("{ncomp} components, expected 2")));
    }
    let time = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let grid = GridSpec::new(n1, n2).map_err(|e| bad(e.to_string()))?;
    let expected = HEADER_LEN + 16 * grid.len();
    if bytes.len() != expected {
        return Err(bad(format!(
            "payload is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let read_comp = |offset: usize| -> Vec<f64> {
        bytes[offset..offset + 8 * grid.len()]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let u = read_comp(HEADER_LEN);
    let v = read_comp(HEADER_LEN + 8 * grid.len());
    let field = ScalarField::from_values(grid, u)
        .and_then(|u| VectorField::new(u, ScalarField::from_values(grid, v)?))
        .map_err(|e| bad(e.to_string()))?;
    Ok((field, time))
}

pub fn write_field(path: &Path, field: &VectorField, time: f64) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_field(field, time))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<(VectorField, f64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_field(&bytes, path)
}
