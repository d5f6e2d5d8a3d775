//! Checkpoint archive layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "MDCKPT\0\0"
//! version  u32      CHECKPOINT_VERSION
//! hlen     u64      length of the JSON header
//! header   hlen bytes of JSON: { meta, tensors: [...], payload_sha256 }
//! payload  f64 values of every tensor, in directory order
//! ```
//!
//! Each directory entry records role, layer index, layer name, tensor kind
//! (`weight` or `bias`), shape and element count.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::networks::arch::{NetworkParams, Role};
use crate::networks::model::{BundleMeta, ModelBundle};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"MDCKPT\0\0";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    role: Role,
    layer: usize,
    name: String,
    kind: String,
    shape: Vec<usize>,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: BundleMeta,
    tensors: Vec<TensorEntry>,
    payload_sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn serialize_parameters(bundle: &ModelBundle) -> (Vec<TensorEntry>, Vec<u8>) {
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    for role in Role::ALL {
        let net = bundle.get(role);
        let names = role.layer_names();
        for (l, (spec, layer)) in net.specs.iter().zip(&net.layers).enumerate() {
            for (kind, values, shape) in [
                ("weight", &layer.weight, spec.weight_shape().to_vec()),
                ("bias", &layer.bias, vec![spec.c_out]),
            ] {
                tensors.push(TensorEntry {
                    role,
                    layer: l,
                    name: names[l].clone(),
                    kind: kind.to_string(),
                    shape,
                    count: values.len(),
                });
                for v in values {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    (tensors, payload)
}

/// Content hash of all parameters (hex SHA-256 of the checkpoint payload).
pub fn parameter_digest(bundle: &ModelBundle) -> String {
    hex(&Sha256::digest(serialize_parameters(bundle).1))
}

pub fn save_checkpoint(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    bundle.validate()?;
    let (tensors, payload) = serialize_parameters(bundle);
    let header = Header {
        meta: bundle.meta.clone(),
        tensors,
        payload_sha256: hex(&Sha256::digest(&payload)),
    };
    let header = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(20 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<ModelBundle> {
    let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("missing checkpoint magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = 20usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[20..header_end]).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let payload = &bytes[header_end..];
    if hex(&Sha256::digest(payload)) != header.payload_sha256 {
        return Err(corrupt("payload digest mismatch"));
    }
    if !payload.len().is_multiple_of(8) {
        return Err(corrupt("payload is not a whole number of f64 values"));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));

    let width = header.meta.width;
    let mut nets: Vec<NetworkParams> = Role::ALL.iter().map(|&r| NetworkParams::zeros(r, width)).collect();
    let mut expected = Vec::new();
    for net in &nets {
        for (l, spec) in net.specs.iter().enumerate() {
            expected.push((net.role, l, "weight", spec.weight_shape().to_vec()));
            expected.push((net.role, l, "bias", vec![spec.c_out]));
        }
    }
    if expected.len() != header.tensors.len() {
        return Err(corrupt("tensor directory does not match the architecture"));
    }
    for (entry, (role, l, kind, shape)) in header.tensors.iter().zip(expected) {
        if entry.role != role || entry.layer != l || entry.kind != kind || entry.shape != shape {
            return Err(Error::CorruptCheckpoint(format!(
                "unexpected tensor {}/{}/{} with shape {:?}",
                entry.role, entry.name, entry.kind, entry.shape
            )));
        }
        let layer = &mut nets[role.index()].layers[l];
        let dst = if kind == "weight" {
            &mut layer.weight
        } else {
            &mut layer.bias
        };
        for d in dst.iter_mut() {
            *d = values.next().ok_or_else(|| corrupt("payload too short"))?;
        }
    }
    if values.next().is_some() {
        return Err(corrupt("trailing payload"));
    }
    let mut it = nets.into_iter();
    let mut next = || it.next().expect("seven networks");
    let bundle = ModelBundle {
        omega: next(),
        alpha: [next(), next(), next()],
        theta: [next(), next(), next()],
        meta: header.meta,
    };
    bundle.validate()?;
    Ok(bundle)
}
