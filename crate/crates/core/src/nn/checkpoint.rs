//! Binary model checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        8 bytes   "AGOPMLP\0"
//! version      u32       currently 1
//! seed         u64
//! train_epochs u64
//! has_acc      u8        0 or 1
//! accuracy     f64       final training accuracy (0.0 when has_acc = 0)
//! n_dims       u32       number of entries in layer_dims
//! layer_dims   u64 * n_dims
//! per layer l:
//!   out, in    u64, u64  must equal layer_dims[l + 1], layer_dims[l]
//!   weights    f64 * out * in, row-major
//!   biases     f64 * out
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a round trip is bit-exact.

use super::{Layer, Mlp};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AGOPMLP\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode(model: &Mlp) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.extend_from_slice(&(model.train_epochs as u64).to_le_bytes());
    out.push(u8::from(model.final_train_accuracy.is_some()));
    out.extend_from_slice(&model.final_train_accuracy.unwrap_or(0.0).to_le_bytes());
    let dims = model.layer_dims();
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    for layer in model.layers() {
        out.extend_from_slice(&(layer.out_dim() as u64).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u64).to_le_bytes());
        for w in layer.weights.as_slice() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in &layer.biases {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Parse {
            section: section.to_string(),
            detail: format!("need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()),
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, section: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, section: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self, section: &str) -> Result<usize> {
        let v = self.u64(section)?;
        usize::try_from(v).map_err(|_| Error::Parse { section: section.into(), detail: format!("{v} overflows usize") })
    }

    fn f64s(&mut self, n: usize, section: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Parse { section: section.into(), detail: "size overflow".into() })?;
        let raw = self.take(len, section)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "header")? != CHECKPOINT_MAGIC {
        return Err(Error::Parse { section: "header".into(), detail: "bad magic".into() });
    }
    let version = r.u32("header")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse { section: "header".into(), detail: format!("unsupported version {version}") });
    }
    let seed = r.u64("metadata")?;
    let train_epochs = r.usize("metadata")?;
    let has_acc = r.take(1, "metadata")?[0];
    let acc = f64::from_le_bytes(r.take(8, "metadata")?.try_into().expect("8 bytes"));
    let n_dims = r.u32("layer_dims")? as usize;
    if n_dims < 2 {
        return Err(Error::Parse { section: "layer_dims".into(), detail: format!("{n_dims} dims, need at least 2") });
    }
    let dims = (0..n_dims).map(|_| r.usize("layer_dims")).collect::<Result<Vec<_>>>()?;

    let mut layers = Vec::with_capacity(n_dims - 1);
    for l in 0..n_dims - 1 {
        let section = format!("layer {l}");
        let out = r.usize(&section)?;
        let inp = r.usize(&section)?;
        if (out, inp) != (dims[l + 1], dims[l]) {
            return Err(Error::Shape(format!(
                "layer {l} stored as {out}x{inp} but layer_dims declare {}x{}",
                dims[l + 1],
                dims[l]
            )));
        }
        let weights = r.f64s(out.saturating_mul(inp), &format!("layer {l} weights"))?;
        let biases = r.f64s(out, &format!("layer {l} biases"))?;
        layers.push(Layer::new(Matrix::from_vec(out, inp, weights)?, biases)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Parse {
            section: "trailer".into(),
            detail: format!("{} unexpected trailing bytes", bytes.len() - r.pos),
        });
    }
    let mut model = Mlp::from_layers(layers)?;
    model.seed = seed;
    model.train_epochs = train_epochs;
    model.final_train_accuracy = (has_acc != 0).then_some(acc);
    Ok(model)
}

pub fn save_model(model: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Mlp> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_mlp;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut model = init_mlp(7, 3, 9).unwrap();
        model.train_epochs = 12;
        model.final_train_accuracy = Some(0.875);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let x = Matrix::from_fn(4, 7, |i, j| (i * 7 + j) as f64 * 0.1 - 1.0);
        let a = model.forward(&x).unwrap();
        let b = back.forward(&x).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn truncated_file_names_section() {
        let bytes = encode(&init_mlp(3, 2, 0).unwrap());
        match decode(&bytes[..bytes.len() - 5]) {
            Err(Error::Parse { section, .. }) => assert_eq!(section, "layer 4 biases"),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(decode(&bytes[..3]), Err(Error::Parse { section, .. }) if section == "header"));
    }

    #[test]
    fn mismatched_dims_are_a_shape_error() {
        let mut bytes = encode(&Mlp::with_dims(&[3, 4, 2], 0).unwrap());
        // first layer_dims entry sits after magic(8) version(4) seed(8) epochs(8) flag(1) acc(8) n_dims(4)
        let offset = 8 + 4 + 8 + 8 + 1 + 8 + 4;
        bytes[offset..offset + 8].copy_from_slice(&5u64.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Shape(_))));
    }
}
