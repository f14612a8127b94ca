//! IDX container: big-endian `u32` magic, big-endian `u32` dimensions, then raw bytes.

use std::path::Path;

use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let raw = bytes
        .get(at..at + 4)
        .ok_or_else(|| Error::data_at("truncated IDX header", at as u64))?;
    Ok(u32::from_be_bytes(raw.try_into().expect("4 bytes")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::data_at(
            format!("bad IDX magic {magic:#010x}, expected {expected:#010x}"),
            0,
        ));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: usize) -> Result<()> {
    let have = bytes.len() - header;
    if have < expected {
        return Err(Error::data_at(
            format!("IDX payload truncated: {have} of {expected} bytes"),
            bytes.len() as u64,
        ));
    }
    if have > expected {
        return Err(Error::data_at(
            format!("{} trailing bytes after IDX payload", have - expected),
            (header + expected) as u64,
        ));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    check_payload(bytes, 16, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    check_payload(bytes, 8, count)?;
    let labels = bytes[8..].to_vec();
    if let Some(pos) = labels.iter().position(|&l| l >= 10) {
        return Err(Error::data_at(
            format!("label {} out of range", labels[pos]),
            (8 + pos) as u64,
        ));
    }
    Ok(labels)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an image/label IDX pair as raw pixel values in `[0, 255]`.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let images =
        parse_idx_images(&read_file(images_path)?).map_err(|e| with_path(e, images_path))?;
    let labels =
        parse_idx_labels(&read_file(labels_path)?).map_err(|e| with_path(e, labels_path))?;
    if images.count != labels.len() {
        return Err(Error::data(format!(
            "count mismatch: {} images in {} but {} labels in {}",
            images.count,
            images_path.display(),
            labels.len(),
            labels_path.display()
        )));
    }
    let features = images.rows * images.cols;
    let pixels = images.pixels.iter().map(|&p| p as f64).collect();
    let images = Matrix::from_vec(images.count, features, pixels)?;
    Dataset::new(images, labels, split)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Data { msg, offset } => Error::Data {
            msg: format!("{}: {msg}", path.display()),
            offset,
        },
        other => other,
    }
}
