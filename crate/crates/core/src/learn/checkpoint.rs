//! Versioned binary weight files.
//!
//! Layout (little endian): magic `HPCKP1`, u32 JSON metadata length, the
//! metadata, u32 tensor count, then per tensor a u16 name length, the name,
//! a u8 dtype (0 = f32, 1 = f64), u32 rows, u32 cols and the row-major data.
//! Optimizer moments are stored as ordinary tensors under `adam.m/` and
//! `adam.v/` prefixes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Adam, ParamStore};
use super::tensor::Tensor;
use crate::codec::{read_file, write_file, Reader, Writer};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"HPCKP1";

const ADAM_M: &str = "adam.m/";
const ADAM_V: &str = "adam.v/";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Model family, e.g. `shadow` or `hit`.
    pub model: String,
    /// Model configuration as structured data.
    pub config: serde_json::Value,
    pub seed: u64,
    pub config_hash: Option<String>,
    /// Completed training iterations or epochs.
    pub iteration: u64,
    pub optimizer_step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dtype: DType,
    pub tensor: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    /// Parameters in registration order, then the optimizer moments if given.
    pub fn from_store(mut meta: CheckpointMeta, store: &ParamStore, adam: Option<&Adam>, dtype: DType) -> Self {
        let named = |name: String, t: &Tensor| NamedTensor {
            name,
            dtype,
            tensor: t.clone(),
        };
        let mut tensors: Vec<NamedTensor> = store.iter().map(|(n, t)| named(n.to_string(), t)).collect();
        if let Some(a) = adam {
            meta.optimizer_step = a.step;
            for (prefix, moments) in [(ADAM_M, &a.m), (ADAM_V, &a.v)] {
                tensors.extend(store.names().iter().zip(moments).map(|(n, t)| named(format!("{prefix}{n}"), t)));
            }
        }
        Checkpoint { meta, tensors }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.tensor)
    }

    /// Copies every parameter of `store` from the tensor of the same name.
    pub fn restore_params(&self, store: &mut ParamStore) -> Result<()> {
        let mut loaded = ParamStore::new();
        for name in store.names().to_vec() {
            let t = self.get(&name).ok_or_else(|| Error::Config(format!("checkpoint lacks parameter {name}")))?;
            loaded.add(name, t.clone());
        }
        store.load_from(&loaded)
    }

    /// Restores optimizer moments and step count for the parameters of `store`.
    pub fn restore_adam(&self, adam: &mut Adam, store: &ParamStore) -> Result<()> {
        for (i, name) in store.names().iter().enumerate() {
            for (prefix, moments) in [(ADAM_M, &mut adam.m), (ADAM_V, &mut adam.v)] {
                let key = format!("{prefix}{name}");
                let t = self.get(&key).ok_or_else(|| Error::Config(format!("checkpoint lacks optimizer state {key}")))?;
                if t.shape() != store.get(i).shape() {
                    return Err(Error::Config(format!("optimizer state {key} has shape {:?}", t.shape())));
                }
                moments[i] = t.clone();
            }
        }
        adam.step = self.meta.optimizer_step;
        Ok(())
    }
}

pub fn write_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&ck.meta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(meta.len() as u32);
    w.bytes(&meta);
    w.u32(u32::try_from(ck.tensors.len()).map_err(|_| Error::InvalidArgument("too many tensors".into()))?);
    for nt in &ck.tensors {
        let name = nt.name.as_bytes();
        let len = u16::try_from(name.len()).map_err(|_| Error::InvalidArgument(format!("tensor name {} is too long", nt.name)))?;
        let t = &nt.tensor;
        if t.data.len() != t.rows * t.cols {
            return Err(Error::dim(t.rows * t.cols, t.data.len(), "tensor data"));
        }
        let dim = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("tensor {} is too large", nt.name)));
        w.u16(len);
        w.bytes(name);
        w.u8(nt.dtype.code());
        w.u32(dim(t.rows)?);
        w.u32(dim(t.cols)?);
        for &v in &t.data {
            match nt.dtype {
                DType::F32 => w.f32(v as f32),
                DType::F64 => w.f64(v),
            }
        }
    }
    Ok(w.buf)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let meta_len = r.u32("metadata length")? as usize;
    let meta_at = r.offset();
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len, "metadata")?).map_err(|e| Error::Parse {
        offset: meta_at,
        message: format!("metadata: {e}"),
    })?;
    let n = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let len = r.u16("name length")? as usize;
        let name = r.string(len, "tensor name")?;
        let code_at = r.offset();
        let dtype = match r.u8("dtype")? {
            0 => DType::F32,
            1 => DType::F64,
            c => {
                return Err(Error::Parse {
                    offset: code_at,
                    message: format!("unknown dtype code {c}"),
                })
            }
        };
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        let width = if dtype == DType::F32 { 4 } else { 8 };
        let count = rows.checked_mul(cols).filter(|c| c.checked_mul(width).is_some_and(|b| b <= r.remaining()));
        let count = count.ok_or_else(|| r.err(format!("tensor {name} of shape {rows}x{cols} exceeds the file")))?;
        let data = (0..count)
            .map(|_| match dtype {
                DType::F32 => r.f32("tensor data").map(f64::from),
                DType::F64 => r.f64("tensor data"),
            })
            .collect::<Result<Vec<f64>>>()?;
        tensors.push(NamedTensor {
            name,
            dtype,
            tensor: Tensor { rows, cols, data },
        });
    }
    if r.remaining() != 0 {
        return Err(r.err(format!("{} trailing bytes", r.remaining())));
    }
    Ok(Checkpoint { meta, tensors })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_checkpoint(ck)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::params::AdamConfig;

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            model: "shadow".into(),
            config: serde_json::json!({"width": 32, "scale": 0.1}),
            seed: 7,
            config_hash: Some("abc".into()),
            iteration: 3,
            optimizer_step: 0,
        }
    }

    #[test]
    fn params_and_optimizer_state_restore() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::from_vec(2, 2, vec![1.0, -2.5, 0.125, 3.0]).unwrap());
        store.add("b", Tensor::row_vector(&[0.1, 0.2]));
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.update(&mut store, &[Tensor::filled(2, 2, 0.3), Tensor::row_vector(&[1.0, -1.0])]);
        let ck = Checkpoint::from_store(meta(), &store, Some(&adam), DType::F64);
        let back = read_checkpoint(&write_checkpoint(&ck).unwrap()).unwrap();
        assert_eq!(back, ck);
        let mut s2 = store.clone();
        s2.zero_all();
        back.restore_params(&mut s2).unwrap();
        assert_eq!(s2, store);
        let mut a2 = Adam::new(AdamConfig::default(), &store);
        back.restore_adam(&mut a2, &store).unwrap();
        assert_eq!(a2, adam);
    }

    #[test]
    fn rejects_corruption() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::row_vector(&[1.0, 2.0]));
        let bytes = write_checkpoint(&Checkpoint::from_store(meta(), &store, None, DType::F32)).unwrap();
        assert!(matches!(read_checkpoint(&bytes[..bytes.len() - 1]), Err(Error::Parse { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_checkpoint(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad), Err(Error::Parse { offset: 0, .. })));
        let ck = read_checkpoint(&bytes).unwrap();
        let mut other = ParamStore::new();
        other.add("v", Tensor::row_vector(&[0.0, 0.0]));
        assert!(ck.restore_params(&mut other).is_err());
    }
}
