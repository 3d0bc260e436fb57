//! Binary matrix files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                                           |
//! |--------|------|-------------------------------------------------|
//! | 0      | 6    | magic `b"SSAMAT"`                               |
//! | 6      | 2    | version, currently 1                            |
//! | 8      | 1    | element kind: 0 = real64, 1 = bit-packed        |
//! | 9      | 3    | reserved, zero                                  |
//! | 12     | 4    | rows                                            |
//! | 16     | 4    | cols                                            |
//! | 20     | ...  | payload, row-major                              |
//!
//! real64 payloads hold `rows * cols` IEEE-754 doubles. Bit-packed payloads
//! hold `ceil(cols / 8)` bytes per row; column `c` is bit `c % 8` (LSB first)
//! of byte `c / 8`, and padding bits are zero.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SsaError};
use crate::matrix::{RealMatrix, SpikeMatrix};

pub const MAGIC: &[u8; 6] = b"SSAMAT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ElementKind {
    Real64 = 0,
    BitPacked = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Real(RealMatrix),
    Bits(SpikeMatrix),
}

impl MatrixData {
    pub fn kind(&self) -> ElementKind {
        match self {
            MatrixData::Real(_) => ElementKind::Real64,
            MatrixData::Bits(_) => ElementKind::BitPacked,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixData::Real(m) => m.shape(),
            MatrixData::Bits(m) => m.shape(),
        }
    }
}

fn bad(msg: impl Into<String>) -> SsaError {
    SsaError::MatrixFile(msg.into())
}

pub fn encode(data: &MatrixData) -> Vec<u8> {
    let (rows, cols) = data.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(data.kind() as u8);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    match data {
        MatrixData::Real(m) => {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        MatrixData::Bits(m) => {
            let stride = cols.div_ceil(8);
            for r in 0..rows {
                let mut row = vec![0u8; stride];
                for (c, &b) in m.row(r).iter().enumerate() {
                    row[c / 8] |= b << (c % 8);
                }
                out.extend_from_slice(&row);
            }
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<MatrixData> {
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..6] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[6], bytes[7]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    if bytes[9..12] != [0, 0, 0] {
        return Err(bad("reserved header bytes must be zero"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let rows = u32_at(12);
    let cols = u32_at(16);
    if rows == 0 || cols == 0 {
        return Err(bad("matrix dimensions must be positive"));
    }
    let payload = &bytes[HEADER_LEN..];
    let too_large = || bad(format!("{rows} x {cols} matrix is too large"));
    match bytes[8] {
        0 => {
            let expected = rows.checked_mul(cols).and_then(|x| x.checked_mul(8)).ok_or_else(too_large)?;
            if payload.len() != expected {
                return Err(bad(format!("payload is {} bytes, header implies {expected}", payload.len())));
            }
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Ok(MatrixData::Real(RealMatrix::new(rows, cols, data)?))
        }
        1 => {
            let stride = cols.div_ceil(8);
            let expected = rows.checked_mul(stride).ok_or_else(too_large)?;
            if payload.len() != expected {
                return Err(bad(format!("payload is {} bytes, header implies {expected}", payload.len())));
            }
            let mut bits = Vec::with_capacity(rows * cols);
            for (r, row) in payload.chunks_exact(stride).enumerate() {
                for c in 0..cols {
                    bits.push((row[c / 8] >> (c % 8)) & 1);
                }
                let pad = stride * 8 - cols;
                if pad > 0 && row[stride - 1] >> (8 - pad) != 0 {
                    return Err(bad(format!("nonzero padding bits in row {r}")));
                }
            }
            Ok(MatrixData::Bits(SpikeMatrix::new(rows, cols, bits)?))
        }
        k => Err(bad(format!("unknown element kind {k}"))),
    }
}

pub fn write_to<W: Write>(mut w: W, data: &MatrixData) -> Result<()> {
    w.write_all(&encode(data))?;
    Ok(())
}

pub fn read_from<R: Read>(mut r: R) -> Result<MatrixData> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

pub fn write_file(path: impl AsRef<Path>, data: &MatrixData) -> Result<()> {
    fs::write(path, encode(data))?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<MatrixData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| SsaError::Io(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

/// Reads a file that must hold a real64 matrix.
pub fn read_real_file(path: impl AsRef<Path>) -> Result<RealMatrix> {
    match read_file(path)? {
        MatrixData::Real(m) => Ok(m),
        MatrixData::Bits(_) => Err(bad("expected real64 matrix, found bit-packed")),
    }
}

/// Stacks equal-shape spike matrices vertically into one bit-packed matrix.
pub fn stack_spikes(mats: &[SpikeMatrix]) -> Result<SpikeMatrix> {
    let first = mats.first().ok_or(SsaError::EmptySequence)?;
    let cols = first.cols();
    let mut bits = Vec::with_capacity(mats.len() * first.rows() * cols);
    for m in mats {
        if m.shape() != first.shape() {
            return Err(SsaError::DimensionMismatch {
                context: "stack_spikes",
                expected: first.shape(),
                actual: m.shape(),
            });
        }
        bits.extend_from_slice(m.as_bytes());
    }
    SpikeMatrix::new(mats.len() * first.rows(), cols, bits)
}
