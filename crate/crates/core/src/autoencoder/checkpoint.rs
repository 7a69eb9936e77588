//! Binary checkpoint container.
//!
//! Layout: 8-byte magic, `u32` version, `u64` header length, a JSON header
//! (model spec plus parameter names and shapes), then every parameter as
//! little-endian `f64` values in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"TPMODEL\0";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    params: Vec<ParamEntry>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        spec: model.spec.clone(),
        params: model
            .params
            .iter()
            .map(|(name, t)| ParamEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(20 + json.len() + model.num_parameters() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, t) in &model.params {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn corrupt(path: &Path, what: &str) -> Error {
    Error::Format {
        line: 0,
        message: format!("{}: {what}", path.display()),
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt(path, "not a model checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(
            path,
            &format!("unsupported checkpoint version {version}"),
        ));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(20..20usize.saturating_add(hlen))
        .ok_or_else(|| corrupt(path, "truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    let mut rest = &bytes[20 + hlen..];
    let mut params = Vec::with_capacity(header.params.len());
    for entry in header.params {
        let n: usize = entry.shape.iter().product();
        if rest.len() < n * 8 {
            return Err(corrupt(path, &format!("truncated data for {}", entry.name)));
        }
        let data = rest[..n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        rest = &rest[n * 8..];
        params.push((entry.name, Tensor::new(entry.shape, data)?));
    }
    if !rest.is_empty() {
        return Err(corrupt(path, "trailing bytes after parameters"));
    }
    Ok(ModelParams::from_parts(header.spec, params))
}
