//! Binary dataset cache used by the command line tools.
//!
//! Little-endian layout, floats as IEEE-754 bit patterns:
//!
//! ```text
//! magic        8 bytes  "ODMXDATA"
//! version      u32      1
//! samples      u64
//! features     u64
//! classes      u32
//! has_truth    u8
//! ids          u64 × samples
//! features     f64 × samples·features (row-major)
//! labels       f64 × samples·classes  (row-major)
//! truth        u32 × samples          (only when has_truth = 1)
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::dataset::LabeledDataset;

pub const MAGIC: &[u8; 8] = b"ODMXDATA";
pub const VERSION: u32 = 1;

pub fn write_dataset(path: impl AsRef<Path>, dataset: &LabeledDataset) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    encode_dataset(&mut out, dataset)?;
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    decode_dataset(BufReader::new(fs::File::open(path)?))
}

pub fn encode_dataset<W: Write>(out: &mut W, ds: &LabeledDataset) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(ds.len() as u64).to_le_bytes())?;
    out.write_all(&(ds.feature_count() as u64).to_le_bytes())?;
    out.write_all(&(ds.class_count() as u32).to_le_bytes())?;
    out.write_all(&[u8::from(ds.ground_truth().is_some())])?;
    for id in ds.ids() {
        out.write_all(&id.to_le_bytes())?;
    }
    for v in ds.features().as_slice().iter().chain(ds.labels().as_slice()) {
        out.write_all(&v.to_bits().to_le_bytes())?;
    }
    if let Some(gt) = ds.ground_truth() {
        for &c in gt {
            out.write_all(&(c as u32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn decode_dataset<R: Read>(mut input: R) -> Result<LabeledDataset> {
    let mut offset = 0u64;
    let mut take = |n: usize, offset: &mut u64| -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        input.read_exact(&mut buf).map_err(|_| Error::Format {
            offset: *offset,
            message: format!("truncated dataset cache: needed {n} more bytes"),
        })?;
        *offset += n as u64;
        Ok(buf)
    };
    if take(8, &mut offset)? != MAGIC {
        return Err(Error::Format { offset: 0, message: "not a dataset cache".into() });
    }
    let version = u32::from_le_bytes(take(4, &mut offset)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format { offset: 8, message: format!("unsupported cache version {version}") });
    }
    let n = u64::from_le_bytes(take(8, &mut offset)?.try_into().unwrap()) as usize;
    let f = u64::from_le_bytes(take(8, &mut offset)?.try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(take(4, &mut offset)?.try_into().unwrap()) as usize;
    let has_truth = take(1, &mut offset)?[0] == 1;
    let u64s = |raw: Vec<u8>| -> Vec<u64> {
        raw.chunks_exact(8).map(|b| u64::from_le_bytes(b.try_into().unwrap())).collect()
    };
    let ids = u64s(take(n * 8, &mut offset)?);
    let features = u64s(take(n * f * 8, &mut offset)?).into_iter().map(f64::from_bits).collect();
    let labels = u64s(take(n * c * 8, &mut offset)?).into_iter().map(f64::from_bits).collect();
    let truth = if has_truth {
        let raw = take(n * 4, &mut offset)?;
        Some(raw.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize).collect())
    } else {
        None
    };
    LabeledDataset::new(Matrix::from_vec(n, f, features)?, Matrix::from_vec(n, c, labels)?, truth, ids, c)
}
