//! FCKP checkpoint files.
//!
//! ```text
//! "FCKP" | version u8 = 1 | u16 tensor count
//! per tensor: u16 name length | UTF-8 name | FTNS blob
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{Network, NetworkConfig};
use crate::error::{Error, Result};
use crate::io::{decode_tensor, encode_tensor};
use crate::tensor::{Scalar, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FCKP";
const CHECKPOINT_VERSION: u8 = 1;

pub fn encode_checkpoint<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let mut out = CHECKPOINT_MAGIC.to_vec();
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(net.params().len() as u16).to_le_bytes());
    for (name, value) in net.param_names().iter().zip(net.params()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&encode_tensor(value));
    }
    out
}

fn truncated() -> Error {
    Error::Checkpoint("truncated checkpoint".into())
}

fn read_u16(bytes: &[u8], pos: &mut usize) -> Result<u16> {
    let b = bytes.get(*pos..*pos + 2).ok_or_else(truncated)?;
    *pos += 2;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

/// Parses the named tensors of a checkpoint without reference to any
/// network configuration.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<BTreeMap<String, Tensor<T>>> {
    if bytes.len() < 5 {
        return Err(truncated());
    }
    if bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes[4] != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", bytes[4])));
    }
    let mut pos = 5;
    let count = read_u16(bytes, &mut pos)?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let len = read_u16(bytes, &mut pos)? as usize;
        let raw = bytes.get(pos..pos + len).ok_or_else(truncated)?;
        pos += len;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let (tensor, used) =
            decode_tensor::<T>(&bytes[pos..]).map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
        pos += used;
        if tensors.insert(name.clone(), tensor).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
    }
    if pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(tensors)
}

pub fn save_checkpoint<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

/// Loads parameters into a fresh network built from `config`. Every
/// expected tensor must be present with matching dims; extra tensors are
/// rejected.
pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>, config: &NetworkConfig) -> Result<Network<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    restore(&bytes, config)
}

pub fn restore<T: Scalar>(bytes: &[u8], config: &NetworkConfig) -> Result<Network<T>> {
    let mut stored = decode_checkpoint::<T>(bytes)?;
    let template = Network::<T>::new(config.clone())?;
    let mut values = Vec::with_capacity(template.params().len());
    for (name, expected) in template.param_names().iter().zip(template.params()) {
        let t = stored
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.dims() != expected.dims() {
            return Err(Error::shape(format!(
                "checkpoint tensor {name} has dims {:?}, network expects {:?}",
                t.dims(),
                expected.dims()
            )));
        }
        values.push(t);
    }
    if let Some(extra) = stored.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
    }
    Network::from_parts(config.clone(), values)
}
