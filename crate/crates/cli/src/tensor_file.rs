//! `TT3F` binary tensor files.
//!
//! ```text
//! offset  size   field
//! 0       4      magic "TT3F"
//! 4       2      version, u16 LE (currently 1)
//! 6       24     n1, n2, n3 as u64 LE
//! 30      8·N    entries as f64 LE, slice-major (i fastest, then j, then k)
//! 30+8N   4      CRC-32 (IEEE) of the entry bytes, u32 LE
//! ```

use std::fs;
use std::path::Path;

use rtsvd::Tensor3;

pub const MAGIC: &[u8; 4] = b"TT3F";
pub const VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 24;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a TT3F file")]
    BadMagic,
    #[error("unsupported TT3F version {0}")]
    UnsupportedVersion(u16),
    #[error("file is {got} bytes, expected {expected}")]
    Length { expected: u64, got: u64 },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid tensor: {0}")]
    Tensor(#[from] rtsvd::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(t: &Tensor3) -> Vec<u8> {
    let (n1, n2, n3) = t.dims();
    let mut out = Vec::with_capacity(HEADER + 8 * t.data().len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in [n1, n2, n3] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[HEADER..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Header fields of a TT3F buffer, validated up to the payload length.
pub fn header(bytes: &[u8]) -> Result<(u16, [usize; 3]), FormatError> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let dim = |i: usize| u64::from_le_bytes(bytes[6 + 8 * i..14 + 8 * i].try_into().unwrap());
    let dims = [dim(0), dim(1), dim(2)];
    let expected = dims
        .iter()
        .try_fold(8u64, |acc, &d| acc.checked_mul(d))
        .and_then(|p| p.checked_add((HEADER + 4) as u64))
        .unwrap_or(u64::MAX);
    if expected != bytes.len() as u64 {
        return Err(FormatError::Length {
            expected,
            got: bytes.len() as u64,
        });
    }
    Ok((version, dims.map(|d| d as usize)))
}

pub fn decode(bytes: &[u8]) -> Result<Tensor3, FormatError> {
    let (_, [n1, n2, n3]) = header(bytes)?;
    let end = bytes.len() - 4;
    let payload = &bytes[HEADER..end];
    let stored = u32::from_le_bytes(bytes[end..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor3::new(n1, n2, n3, data)?)
}

pub fn write(path: impl AsRef<Path>, t: &Tensor3) -> Result<(), FormatError> {
    fs::write(path, encode(t))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Tensor3, FormatError> {
    decode(&fs::read(path)?)
}
