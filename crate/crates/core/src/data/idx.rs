//! MNIST distribution format: big-endian `u32` magic, `u32` dimension sizes,
//! then one unsigned byte per element.

use std::fs;
use std::path::Path;

use super::{Dataset, Split};
use crate::error::{io_err, Result, SnnError};
use crate::network::Shape3;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> SnnError {
        SnnError::Parse { path: self.path.to_path_buf(), msg: msg.into() }
    }

    fn u32(&mut self) -> Result<u32> {
        let Some(chunk) = self.bytes.get(self.pos..self.pos + 4) else {
            return Err(self.err(format!("truncated header at byte {}", self.pos)));
        };
        self.pos += 4;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn payload(&self, expected: usize) -> Result<&'a [u8]> {
        let rest = &self.bytes[self.pos..];
        if rest.len() < expected {
            return Err(self.err(format!("truncated payload: {} of {expected} bytes", rest.len())));
        }
        if rest.len() > expected {
            return Err(self.err(format!("{} trailing bytes after payload", rest.len() - expected)));
        }
        Ok(rest)
    }
}

fn read_header(path: &Path, bytes: &[u8], magic: u32) -> Result<(Vec<usize>, usize)> {
    let mut r = Reader { bytes, pos: 0, path };
    let found = r.u32()?;
    if found != magic {
        return Err(r.err(format!("unexpected magic 0x{found:08x}, wanted 0x{magic:08x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let expected = dims.iter().product();
    r.payload(expected)?;
    Ok((dims, r.pos))
}

/// Loads an IDX image/label pair. Pixels are scaled by `1/255`; the class
/// count is one past the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let img = fs::read(images_path).map_err(io_err(images_path))?;
    let lbl = fs::read(labels_path).map_err(io_err(labels_path))?;
    let (idims, ioff) = read_header(images_path, &img, IDX_IMAGES_MAGIC)?;
    let (ldims, loff) = read_header(labels_path, &lbl, IDX_LABELS_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(SnnError::Parse {
            path: labels_path.to_path_buf(),
            msg: format!("{} labels for {} images", ldims[0], idims[0]),
        });
    }
    let shape = Shape3::new(1, idims[1], idims[2]);
    let values = img[ioff..].iter().map(|&b| f32::from(b) / 255.0).collect();
    let labels: Vec<usize> = lbl[loff..].iter().map(|&b| usize::from(b)).collect();
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(shape, None, class_count, split, values, labels)
}

/// Writes a single-channel static dataset as an IDX pair. Values are stored
/// as `round(255 * v)`, so data loaded from IDX round-trips exactly.
pub fn write_idx(data: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    if data.frames.is_some() || data.shape.channels != 1 {
        return Err(SnnError::Contract("IDX holds single-channel static images only".into()));
    }
    if data.class_count > 256 {
        return Err(SnnError::Contract("IDX labels are single bytes".into()));
    }
    let n = data.len() as u32;
    let mut img = Vec::with_capacity(16 + data.values().len());
    img.extend(IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend(n.to_be_bytes());
    img.extend((data.shape.height as u32).to_be_bytes());
    img.extend((data.shape.width as u32).to_be_bytes());
    img.extend(data.values().iter().map(|&v| (v * 255.0).round() as u8));

    let mut lbl = Vec::with_capacity(8 + data.len());
    lbl.extend(IDX_LABELS_MAGIC.to_be_bytes());
    lbl.extend(n.to_be_bytes());
    lbl.extend(data.labels().iter().map(|&l| l as u8));

    fs::write(images_path, img).map_err(io_err(images_path))?;
    fs::write(labels_path, lbl).map_err(io_err(labels_path))?;
    Ok(())
}
