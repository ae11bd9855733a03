use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{MagicNetConfig, ModelWeights};
use crate::Real;

pub const MAGIC: [u8; 4] = *b"MGNT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("not a weight file: magic {found:?}, expected \"MGNT\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported weight file version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated weight file: {what} needs {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        what: String,
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("tensor name at offset {offset} is not valid UTF-8")]
    BadName { offset: usize },
    #[error("tensor {0:?} appears more than once")]
    Duplicate(String),
    #[error("missing tensors: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("unexpected tensors: {}", .0.join(", "))]
    Unexpected(Vec<String>),
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("{count} trailing bytes after the last tensor")]
    TrailingBytes { count: usize },
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Serializes every tensor (as 32-bit floats) in layout order.
pub fn weights_to_bytes<T: Real>(weights: &ModelWeights<T>) -> Vec<u8> {
    let layout = weights.layout();
    let tensors = weights.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    for (info, data) in layout.iter().zip(tensors) {
        out.extend_from_slice(&(info.name.len() as u16).to_le_bytes());
        out.extend_from_slice(info.name.as_bytes());
        out.push(info.dims.len() as u8);
        for &d in &info.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: impl FnOnce() -> String) -> Result<&'a [u8], LoadError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(LoadError::Truncated {
                what: what(),
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: impl FnOnce() -> String) -> Result<u32, LoadError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses a weight file for the default network configuration.
pub fn weights_from_bytes<T: Real>(bytes: &[u8]) -> Result<ModelWeights<T>, LoadError> {
    weights_from_bytes_with(bytes, MagicNetConfig::default())
}

/// Parses a weight file and checks it against `config`.
pub fn weights_from_bytes_with<T: Real>(bytes: &[u8], config: MagicNetConfig) -> Result<ModelWeights<T>, LoadError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, || "magic".into())?;
    if magic != MAGIC {
        return Err(LoadError::BadMagic { found: magic.to_vec() });
    }
    let version = r.u32(|| "format version".into())?;
    if version != FORMAT_VERSION {
        return Err(LoadError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let count = r.u32(|| "tensor count".into())? as usize;
    let mut found: HashMap<String, (Vec<usize>, Vec<f32>)> = HashMap::new();
    let mut order = Vec::new();
    for i in 0..count {
        let name_len = u16::from_le_bytes(r.take(2, || format!("name length of tensor {i}"))?.try_into().unwrap());
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(name_len as usize, || format!("name of tensor {i}"))?)
            .map_err(|_| LoadError::BadName { offset: name_at })?
            .to_string();
        let rank = r.take(1, || format!("rank of {name}"))?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32(|| format!("dims of {name}"))? as usize);
        }
        let byte_len = dims
            .iter()
            .try_fold(4usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        let raw = r.take(byte_len, || format!("data of {name}"))?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if found.insert(name.clone(), (dims, data)).is_some() {
            return Err(LoadError::Duplicate(name));
        }
        order.push(name);
    }
    if r.pos != bytes.len() {
        return Err(LoadError::TrailingBytes { count: bytes.len() - r.pos });
    }

    let mut weights = ModelWeights::<T>::zeros(config).expect("default config is valid");
    let layout = weights.layout();
    let missing: Vec<String> = layout.iter().filter(|t| !found.contains_key(&t.name)).map(|t| t.name.clone()).collect();
    if !missing.is_empty() {
        return Err(LoadError::Missing(missing));
    }
    let unexpected: Vec<String> = order.into_iter().filter(|n| !layout.iter().any(|t| &t.name == n)).collect();
    if !unexpected.is_empty() {
        return Err(LoadError::Unexpected(unexpected));
    }
    for (info, dst) in layout.iter().zip(weights.tensors_mut()) {
        let (dims, data) = found.remove(&info.name).expect("presence checked");
        if dims != info.dims {
            return Err(LoadError::Shape {
                name: info.name.clone(),
                expected: info.dims.clone(),
                found: dims,
            });
        }
        *dst = data.into_iter().map(|v| T::lit(v as f64)).collect();
    }
    Ok(weights)
}

pub fn save_weights<T: Real>(weights: &ModelWeights<T>, path: impl AsRef<Path>) -> Result<(), LoadError> {
    let path = path.as_ref();
    fs::write(path, weights_to_bytes(weights)).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_weights<T: Real>(path: impl AsRef<Path>) -> Result<ModelWeights<T>, LoadError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    weights_from_bytes(&bytes)
}
