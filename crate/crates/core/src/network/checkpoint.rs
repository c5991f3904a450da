//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian, floats stored as their
//! IEEE-754 bit patterns so a round trip is bit-exact:
//!
//! ```text
//! magic        8 bytes   "ODMXCKPT"
//! version      u32       1
//! n_widths     u32
//! widths       u32 × n_widths
//! per layer    weights f64 × (fan_in·fan_out), row-major; bias f64 × fan_out
//! has_adam     u8        0 or 1
//! if has_adam: lr, beta1, beta2, eps (f64), step (u64),
//!              first moments per layer (weights then bias),
//!              second moments per layer (weights then bias)
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::adam::AdamState;
use super::backprop::LayerGradient;
use super::mlp::{DenseLayer, Mlp};

pub const MAGIC: &[u8; 8] = b"ODMXCKPT";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, model: &Mlp, adam: Option<&AdamState>) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(model.widths().len() as u32).to_le_bytes())?;
    for &w in model.widths() {
        out.write_all(&(w as u32).to_le_bytes())?;
    }
    for layer in model.layers() {
        write_f64s(&mut out, layer.weights.as_slice())?;
        write_f64s(&mut out, &layer.bias)?;
    }
    match adam {
        None => out.write_all(&[0])?,
        Some(state) => {
            out.write_all(&[1])?;
            write_f64s(&mut out, &[state.lr, state.beta1, state.beta2, state.eps])?;
            out.write_all(&state.step.to_le_bytes())?;
            for moments in [&state.first, &state.second] {
                for g in moments {
                    write_f64s(&mut out, g.weights.as_slice())?;
                    write_f64s(&mut out, &g.bias)?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<(Mlp, Option<AdamState>)> {
    let mut r = Reader { inner: input, offset: 0 };
    let magic = r.bytes(8)?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "not a model checkpoint".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 8,
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    let n = r.u32()? as usize;
    if !(2..=64).contains(&n) {
        return Err(r.error(format!("implausible layer count {n}")));
    }
    let widths: Vec<usize> = (0..n).map(|_| r.u32().map(|w| w as usize)).collect::<Result<_>>()?;
    let read_layers = |r: &mut Reader<R>| -> Result<Vec<LayerGradient>> {
        widths
            .windows(2)
            .map(|w| {
                let weights = Matrix::from_raw(w[0], w[1], r.f64s(w[0] * w[1])?);
                let bias = r.f64s(w[1])?;
                Ok(LayerGradient { weights, bias })
            })
            .collect()
    };
    let layers = read_layers(&mut r)?
        .into_iter()
        .map(|g| DenseLayer { weights: g.weights, bias: g.bias })
        .collect();
    let model = Mlp::from_layers(layers)?;
    let adam = match r.bytes(1)?[0] {
        0 => None,
        1 => {
            let h = r.f64s(4)?;
            let step = u64::from_le_bytes(r.bytes(8)?.try_into().unwrap());
            let first = read_layers(&mut r)?;
            let second = read_layers(&mut r)?;
            Some(AdamState {
                lr: h[0],
                beta1: h[1],
                beta2: h[2],
                eps: h[3],
                step,
                first,
                second,
            })
        }
        flag => return Err(r.error(format!("bad optimiser flag {flag}"))),
    };
    Ok((model, adam))
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_bits().to_le_bytes())?;
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn error(&self, message: String) -> Error {
        Error::Format {
            offset: self.offset,
            message,
        }
    }

    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|_| self.error(format!("truncated: needed {n} more bytes")))?;
        self.offset += n as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.bytes(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}
