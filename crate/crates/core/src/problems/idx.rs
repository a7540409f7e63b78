//! Reader and writer for the big-endian IDX format used by MNIST.

use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::num::DenseMatrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Image rows flattened and scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn to_matrix(&self) -> DenseMatrix {
        let width = self.rows * self.cols;
        DenseMatrix::from_rows(self.count, width, self.pixels.iter().map(|&p| p as f64 / 255.0).collect())
    }
}

fn header(bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<usize>, usize)> {
    let head = 4 + 4 * dims;
    if bytes.len() < 4 {
        return Err(Error::IdxTruncated { needed: 4, found: bytes.len() });
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().expect("four bytes"));
    if found != magic {
        return Err(Error::IdxMagic { expected: magic, found });
    }
    if bytes.len() < head {
        return Err(Error::IdxTruncated { needed: head, found: bytes.len() });
    }
    let sizes: Vec<usize> = (0..dims)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("four bytes")) as usize)
        .collect();
    let payload = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .and_then(|p| p.checked_add(head))
        .ok_or(Error::IdxOverflow)?;
    if bytes.len() < payload {
        return Err(Error::IdxTruncated { needed: payload, found: bytes.len() });
    }
    Ok((sizes, head))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let (sizes, head) = header(bytes, IMAGE_MAGIC, 3)?;
    let len = sizes[0] * sizes[1] * sizes[2];
    Ok(IdxImages { count: sizes[0], rows: sizes[1], cols: sizes[2], pixels: bytes[head..head + len].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let (sizes, head) = header(bytes, LABEL_MAGIC, 1)?;
    Ok(bytes[head..head + sizes[0]].to_vec())
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&fs::read(path)?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?)
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for s in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(s as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    Ok(fs::write(path, encode_idx_images(images))?)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    Ok(fs::write(path, encode_idx_labels(labels))?)
}

/// Loads an image file and its label file as a dataset with `classes`
/// classes (10 for MNIST).
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, classes: usize) -> Result<LabeledDataset> {
    let img = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if lab.len() != img.count {
        return Err(Error::Dimension { what: "IDX labels", expected: img.count, got: lab.len() });
    }
    LabeledDataset::new(img.to_matrix(), lab.into_iter().map(usize::from).collect(), classes)
}
