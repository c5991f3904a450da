//! IDX image/label files as distributed for handwritten digits.
//!
//! Both files are big-endian. Images: magic `0x00000803`, count, rows, cols,
//! then one byte per pixel. Labels: magic `0x00000801`, count, then one byte
//! per label. Gzip-compressed files are detected by their magic and
//! decompressed transparently.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::dataset::LabeledDataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Decoded digit images (pixels scaled to `[0, 1]`) with their digit labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDigits {
    pub images: Matrix,
    pub digits: Vec<u8>,
    pub image_rows: usize,
    pub image_cols: usize,
}

impl RawDigits {
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// The first `n` images.
    pub fn take(&self, n: usize) -> RawDigits {
        let n = n.min(self.len());
        let rows: Vec<usize> = (0..n).collect();
        RawDigits {
            images: self.images.select_rows(&rows),
            digits: self.digits[..n].to_vec(),
            image_rows: self.image_rows,
            image_cols: self.image_cols,
        }
    }

    pub fn select(&self, rows: &[usize]) -> RawDigits {
        RawDigits {
            images: self.images.select_rows(rows),
            digits: rows.iter().map(|&r| self.digits[r]).collect(),
            image_rows: self.image_rows,
            image_cols: self.image_cols,
        }
    }
}

pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<RawDigits> {
    let image_bytes = read_maybe_gzip(images.as_ref())?;
    let label_bytes = read_maybe_gzip(labels.as_ref())?;
    parse_idx(&image_bytes, &label_bytes)
}

pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<RawDigits> {
    let (count, image_rows, image_cols, pixels) = parse_images(image_bytes)?;
    let digits = parse_labels(label_bytes)?;
    if digits.len() != count {
        return Err(Error::Format {
            offset: 4,
            message: format!("label file holds {} items, image file {count}", digits.len()),
        });
    }
    let data = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    Ok(RawDigits {
        images: Matrix::from_raw(count, image_rows * image_cols, data),
        digits: digits.to_vec(),
        image_rows,
        image_cols,
    })
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated header: needed 4 bytes at offset {offset}"),
        })
}

fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!(
                "truncated image payload: {need} bytes expected from offset 16, file ends after {}",
                payload.len()
            ),
        });
    }
    if payload.len() > need {
        return Err(Error::Format {
            offset: (16 + need) as u64,
            message: format!("{} trailing bytes after image payload", payload.len() - need),
        });
    }
    Ok((count, rows, cols, payload))
}

fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::Format {
            offset: bytes.len().min(8 + count) as u64,
            message: format!("label payload of {} bytes, header announces {count}", payload.len()),
        });
    }
    Ok(payload)
}

pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len().checked_div(rows * cols).unwrap_or(0);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(digits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + digits.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(digits.len() as u32).to_be_bytes());
    out.extend_from_slice(digits);
    out
}

pub fn write_idx(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    pixels: &[u8],
    digits: &[u8],
) -> Result<()> {
    fs::File::create(images)?.write_all(&encode_idx_images(rows, cols, pixels))?;
    fs::File::create(labels)?.write_all(&encode_idx_labels(digits))?;
    Ok(())
}

/// Which digits form class 0 when regrouping ten digits into two classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DigitGrouping {
    /// Digits `0..=last_class0_digit` are class 0, the rest class 1.
    pub last_class0_digit: u8,
}

impl DigitGrouping {
    /// Digits 0–4 against 5–9: 30596 / 29404 training and 5139 / 4861 test
    /// images on the full set.
    pub const ZERO_TO_FOUR: DigitGrouping = DigitGrouping { last_class0_digit: 4 };
    /// Digits 0–3 against 4–9.
    pub const ZERO_TO_THREE: DigitGrouping = DigitGrouping { last_class0_digit: 3 };

    pub fn class_of(self, digit: u8) -> usize {
        usize::from(digit > self.last_class0_digit)
    }
}

impl Default for DigitGrouping {
    fn default() -> Self {
        DigitGrouping::ZERO_TO_FOUR
    }
}

/// Two-class dataset with one-hot labels; ids are the image indices.
pub fn binarize_mnist(raw: &RawDigits, grouping: DigitGrouping) -> Result<LabeledDataset> {
    if let Some(bad) = raw.digits.iter().find(|&&d| d > 9) {
        return Err(Error::Argument(format!("digit label {bad} outside 0..=9")));
    }
    let classes = raw.digits.iter().map(|&d| grouping.class_of(d)).collect();
    LabeledDataset::from_classes(raw.images.clone(), classes, 2)
}
