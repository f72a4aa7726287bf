//! Model file: `b"EVSM"`, a `u32` LE header length, a JSON header
//! (`version`, `config`, `params: [{name, shape}]`, optional `meta`), then
//! every parameter as little-endian `f32` in header order.

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig, Param};
use super::tensor::{Real, Tensor};
use super::NnError;

pub const MODEL_MAGIC: &[u8; 4] = b"EVSM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    params: Vec<ParamEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

pub fn save_model<T: Real>(model: &Model<T>) -> Vec<u8> {
    save_model_with_meta(model, None)
}

/// Serializes with an optional free-form `meta` object in the header.
pub fn save_model_with_meta<T: Real>(model: &Model<T>, meta: Option<&serde_json::Value>) -> Vec<u8> {
    let header = Header {
        version: MODEL_FORMAT_VERSION,
        config: model.config.clone(),
        params: model
            .params
            .iter()
            .map(|p| ParamEntry { name: p.name.clone(), shape: p.value.shape().to_vec() })
            .collect(),
        meta: meta.cloned(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + 4 * model.parameter_count());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &model.params {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_f32().unwrap().to_le_bytes());
        }
    }
    out
}

pub fn load_model<T: Real>(bytes: &[u8]) -> Result<Model<T>, NnError> {
    load_model_with_meta(bytes).map(|(m, _)| m)
}

pub fn load_model_with_meta<T: Real>(bytes: &[u8]) -> Result<(Model<T>, Option<serde_json::Value>), NnError> {
    if bytes.len() < 8 || &bytes[..4] != MODEL_MAGIC {
        return Err(NnError::Format("bad magic: not a model file".into()));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() < hlen {
        return Err(NnError::Format("truncated header".into()));
    }
    let header: Header =
        serde_json::from_slice(&body[..hlen]).map_err(|e| NnError::Format(format!("bad header: {e}")))?;
    if header.version != MODEL_FORMAT_VERSION {
        return Err(NnError::Format(format!("unsupported model version {}", header.version)));
    }
    header.config.validate()?;
    let expected = header.config.parameter_shapes();
    let declared: Vec<(String, Vec<usize>)> = header.params.iter().map(|p| (p.name.clone(), p.shape.clone())).collect();
    if declared != expected {
        return Err(NnError::Format("parameter names/shapes do not match the config".into()));
    }
    let mut payload = &body[hlen..];
    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if payload.len() != 4 * total {
        return Err(NnError::Format(format!("payload is {} bytes, expected {}", payload.len(), 4 * total)));
    }
    let mut params = Vec::with_capacity(expected.len());
    for (name, shape) in expected {
        let n: usize = shape.iter().product();
        let (chunk, rest) = payload.split_at(4 * n);
        payload = rest;
        let data =
            chunk.chunks_exact(4).map(|b| T::from_f32(f32::from_le_bytes(b.try_into().unwrap())).unwrap()).collect();
        params.push(Param { name, value: Tensor::from_vec(&shape, data)? });
    }
    Ok((Model { config: header.config, params }, header.meta))
}
