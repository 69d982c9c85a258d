//! Little-endian binary checkpoint format.
//!
//! ```text
//! magic        8 bytes  "IMBACKPT"
//! version      u32      1
//! scalar_bytes u32      4 (f32) or 8 (f64)
//! layout       7 x u32  point_dim, time_dim, cond_dim, hidden_width,
//!                       hidden_layers, num_classes, activation (0 silu, 1 tanh)
//! tensors      u32      count
//! per tensor   u32 ndim, ndim x u64 dims, then prod(dims) scalars
//! ```
//!
//! Tensor order: per dense layer weight `(out, in)` then bias `(out)`, then
//! the condition table `(num_classes + 1, cond_dim)`.

use std::io::{Read, Write};

use super::model::{Activation, ModelLayout, ModelParams};
use crate::{Error, Result, Scalar};

const MAGIC: &[u8; 8] = b"IMBACKPT";
const VERSION: u32 = 1;

fn tensor_dims<F: Scalar>(params: &ModelParams<F>) -> Vec<Vec<usize>> {
    let mut dims = Vec::new();
    for layer in &params.layers {
        dims.push(layer.weight.shape().to_vec());
        dims.push(layer.bias.shape().to_vec());
    }
    dims.push(params.cond_table.shape().to_vec());
    dims
}

pub fn encode<F: Scalar>(params: &ModelParams<F>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let l = params.layout();
    let header = [
        VERSION,
        F::BYTES as u32,
        l.point_dim as u32,
        l.time_dim as u32,
        l.cond_dim as u32,
        l.hidden_width as u32,
        l.hidden_layers as u32,
        l.num_classes as u32,
        l.activation.code(),
    ];
    for v in header {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let dims = tensor_dims(params);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for (shape, data) in dims.iter().zip(params.slices()) {
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in data {
            v.write_le(&mut out);
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::input(format!(
                "checkpoint truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode<F: Scalar>(bytes: &[u8]) -> Result<ModelParams<F>> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::input("not a checkpoint file (bad magic)"));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::input(format!("unsupported checkpoint version {version}")));
    }
    let width = cur.u32()? as usize;
    if width != F::BYTES {
        return Err(Error::input(format!(
            "checkpoint stores {width}-byte scalars, reader expects {}",
            F::BYTES
        )));
    }
    let mut fields = [0usize; 6];
    for f in &mut fields {
        *f = cur.u32()? as usize;
    }
    let act_code = cur.u32()?;
    let activation = Activation::from_code(act_code)
        .ok_or_else(|| Error::input(format!("unknown activation code {act_code}")))?;
    let layout = ModelLayout {
        point_dim: fields[0],
        time_dim: fields[1],
        cond_dim: fields[2],
        hidden_width: fields[3],
        hidden_layers: fields[4],
        num_classes: fields[5],
        activation,
    };
    layout.validate().map_err(|e| Error::input(format!("checkpoint layout: {e}")))?;
    let expected = tensor_dims(&ModelParams::<F>::zeros(layout)?);
    let count = cur.u32()? as usize;
    if count != expected.len() {
        return Err(Error::input(format!(
            "checkpoint has {count} tensors, layout implies {}",
            expected.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for (i, shape) in expected.iter().enumerate() {
        let ndim = cur.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(cur.u64()? as usize);
        }
        if &dims != shape {
            return Err(Error::input(format!(
                "tensor {i} has shape {dims:?}, layout implies {shape:?}"
            )));
        }
        let n: usize = dims.iter().product();
        let raw = cur.take(n * F::BYTES)?;
        tensors.push(raw.chunks_exact(F::BYTES).map(F::read_le).collect());
    }
    if cur.pos != bytes.len() {
        return Err(Error::input("trailing bytes after checkpoint tensors"));
    }
    ModelParams::from_tensors(layout, tensors)
}

pub fn write<F: Scalar, W: Write>(params: &ModelParams<F>, mut w: W) -> Result<()> {
    w.write_all(&encode(params))?;
    Ok(())
}

pub fn read<F: Scalar, R: Read>(mut r: R) -> Result<ModelParams<F>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), width in 1usize..12, depth in 1usize..4, classes in 1usize..5) {
            let layout = ModelLayout {
                hidden_width: width,
                hidden_layers: depth,
                num_classes: classes,
                ..ModelLayout::default()
            };
            let p = ModelParams::<f64>::init(layout, seed).unwrap();
            let bytes = encode(&p);
            let q: ModelParams<f64> = decode(&bytes).unwrap();
            prop_assert_eq!(&p, &q);
            prop_assert_eq!(bytes, encode(&q));
        }
    }

    #[test]
    fn f32_round_trip_and_width_mismatch() {
        let p = ModelParams::<f32>::init(ModelLayout::default(), 7).unwrap();
        let bytes = encode(&p);
        assert_eq!(decode::<f32>(&bytes).unwrap(), p);
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Input(_))));
    }

    #[test]
    fn corrupted_inputs_rejected() {
        let p = ModelParams::<f64>::init(ModelLayout::default(), 7).unwrap();
        let bytes = encode(&p);
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode::<f64>(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode::<f64>(&long).is_err());
    }
}
