//! IDX container (the MNIST distribution format): big-endian magic, one
//! big-endian u32 per dimension, then unsigned bytes.

use std::io::Write;
use std::path::Path;

use super::{sha256_hex, DataKind, Dataset};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            msg: "truncated header".into(),
        })
}

/// Returns the dimension sizes and the offset of the payload.
fn parse_header(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, usize)> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {found:#010x}, expected {magic:#010x}"),
        });
    }
    let n_dims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(n_dims);
    for d in 0..n_dims {
        dims.push(be_u32(bytes, 4 + 4 * d)? as usize);
    }
    let offset = 4 + 4 * n_dims;
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format {
            offset: 4,
            msg: "dimension product overflows".into(),
        })?;
    let available = bytes.len() - offset;
    if available < total {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            msg: format!("truncated payload: {available} of {total} bytes"),
        });
    }
    if available > total {
        return Err(Error::Format {
            offset: (offset + total) as u64,
            msg: format!("{} trailing bytes after payload", available - total),
        });
    }
    Ok((dims, offset))
}

/// Images scaled to `[0, 1]` (`byte / 255`), one flattened row-major image
/// per sample.
pub fn parse_idx_images(bytes: &[u8], source: &str) -> Result<Dataset> {
    let (dims, offset) = parse_header(bytes, IDX_IMAGES_MAGIC)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows * cols == 0 {
        return Err(Error::Format {
            offset: 8,
            msg: "image dimensions must be positive".into(),
        });
    }
    let samples = bytes[offset..offset + n * rows * cols]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Dataset::with_hash(samples, rows * cols, DataKind::Real, source.to_string(), sha256_hex(bytes))
}

pub fn load_idx(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    parse_idx_images(&bytes, &path.display().to_string())
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path)?;
    let (dims, offset) = parse_header(&bytes, IDX_LABELS_MAGIC)?;
    Ok(bytes[offset..offset + dims[0]].to_vec())
}

/// Writes `n` images of `rows x cols` bytes.
pub fn write_idx_images<W: Write>(mut w: W, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    if rows * cols == 0 || pixels.len() % (rows * cols) != 0 {
        return Err(Error::InvalidParameter("pixel buffer does not hold whole images".into()));
    }
    w.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    for d in [pixels.len() / (rows * cols), rows, cols] {
        w.write_all(&(d as u32).to_be_bytes())?;
    }
    w.write_all(pixels)?;
    Ok(())
}
