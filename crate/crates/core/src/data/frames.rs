//! Dense frame container for pre-converted event recordings.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 0   magic "SNNF"
//! 4   u32 version (1)
//! 8   u32 dtype (1 = f32)
//! 12  u32 n, T, C, H, W, class_count
//! 36  n x u32 labels
//! ..  n*T*C*H*W x f32 values, row-major (n, T, C, H, W)
//! ```

use std::fs;
use std::path::Path;

use super::{Dataset, Split};
use crate::error::{io_err, Result, SnnError};
use crate::network::Shape3;

pub const FRAME_MAGIC: [u8; 4] = *b"SNNF";
pub const FRAME_VERSION: u32 = 1;
const DTYPE_F32: u32 = 1;
const HEADER_LEN: usize = 36;

fn parse_err(path: &Path, msg: impl Into<String>) -> SnnError {
    SnnError::Parse { path: path.to_path_buf(), msg: msg.into() }
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn load_frames(path: &Path, split: Split) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(path, format!("truncated header: {} bytes", bytes.len())));
    }
    if bytes[..4] != FRAME_MAGIC {
        return Err(parse_err(path, "bad magic"));
    }
    let version = le_u32(&bytes, 4);
    if version != FRAME_VERSION {
        return Err(parse_err(path, format!("unsupported version {version}")));
    }
    let dtype = le_u32(&bytes, 8);
    if dtype != DTYPE_F32 {
        return Err(parse_err(path, format!("unsupported dtype code {dtype}")));
    }
    let [n, t, c, h, w, classes] = [12, 16, 20, 24, 28, 32].map(|at| le_u32(&bytes, at) as usize);
    if t == 0 || c == 0 || h == 0 || w == 0 {
        return Err(parse_err(path, "zero-sized dimension"));
    }
    let values_len = n
        .checked_mul(t * c * h * w)
        .ok_or_else(|| parse_err(path, "dimensions overflow"))?;
    let expected = HEADER_LEN + 4 * n + 4 * values_len;
    if bytes.len() != expected {
        return Err(parse_err(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let labels = (0..n).map(|i| le_u32(&bytes, HEADER_LEN + 4 * i) as usize).collect();
    let start = HEADER_LEN + 4 * n;
    let values: Vec<f32> = bytes[start..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    Dataset::new(Shape3::new(c, h, w), Some(t), classes, split, values, labels)
        .map_err(|e| parse_err(path, e.to_string()))
}

pub fn write_frames(data: &Dataset, path: &Path) -> Result<()> {
    let Some(t) = data.frames else {
        return Err(SnnError::Contract("frame container needs a frame dataset".into()));
    };
    let s = data.shape;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * data.len() + 4 * data.values().len());
    out.extend(FRAME_MAGIC);
    for v in [FRAME_VERSION, DTYPE_F32, data.len() as u32, t as u32]
        .into_iter()
        .chain([s.channels, s.height, s.width, data.class_count].map(|d| d as u32))
    {
        out.extend(v.to_le_bytes());
    }
    for &l in data.labels() {
        out.extend((l as u32).to_le_bytes());
    }
    for &v in data.values() {
        out.extend(v.to_le_bytes());
    }
    fs::write(path, out).map_err(io_err(path))
}
