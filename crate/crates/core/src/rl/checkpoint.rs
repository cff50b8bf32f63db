//! Policy checkpoints.
//!
//! Layout: the 8-byte magic `TTRLCKPT`, a little-endian `u32` format version,
//! a little-endian `u32` header length, the JSON header, then the parameters
//! as little-endian `f32` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::net::{NetSpec, PolicyNet};
use crate::engine::GameId;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TTRLCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub game: GameId,
    pub n_players: usize,
    pub net: NetSpec,
    pub param_count: usize,
    pub learner_steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub extra: Value,
}

pub fn encode(net: &PolicyNet<f32>, header: &CheckpointHeader) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * net.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(PolicyNet<f32>, CheckpointHeader)> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a policy checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let blob = &bytes[16 + len..];
    if blob.len() != 4 * header.param_count {
        return Err(Error::Checkpoint(format!(
            "expected {} parameters, found {} bytes",
            header.param_count,
            blob.len()
        )));
    }
    let params = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    let net = PolicyNet::from_params(header.net.clone(), params)?;
    Ok((net, header))
}

/// Writes atomically through a temporary sibling file.
pub fn save(path: &Path, net: &PolicyNet<f32>, header: &CheckpointHeader) -> Result<()> {
    let bytes = encode(net, header)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(PolicyNet<f32>, CheckpointHeader)> {
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}
