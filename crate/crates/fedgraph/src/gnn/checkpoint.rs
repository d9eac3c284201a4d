//! Parameter checkpoints: a flat little-endian f64 vector in `<name>.bin`
//! with a JSON sidecar `<name>.json` recording the layer spec and the
//! flattening order version.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::gat::{GatModel, ModelSpec};
use crate::gnn::Predictor;

/// Flattening layout identifier for attention models; see
/// `GatModel::flatten`.
pub const GAT_ORDERING: &str = "gat-flat-1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub ordering: String,
    pub n_params: usize,
    pub spec: ModelSpec,
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

pub fn save_checkpoint(path: &Path, model: &GatModel) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let flat = model.flatten();
    let mut bytes = Vec::with_capacity(flat.len() * 8);
    for v in &flat {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let meta = CheckpointMeta {
        ordering: GAT_ORDERING.to_string(),
        n_params: flat.len(),
        spec: model.spec.clone(),
    };
    fs::write(sidecar(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(GatModel, CheckpointMeta)> {
    let meta_text = fs::read_to_string(sidecar(path)).map_err(|e| {
        Error::Checkpoint(format!("cannot read sidecar {}: {e}", sidecar(path).display()))
    })?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Checkpoint(format!("invalid sidecar: {e}")))?;
    if meta.ordering != GAT_ORDERING {
        return Err(Error::Checkpoint(format!(
            "unsupported parameter ordering {:?} (expected {GAT_ORDERING:?})",
            meta.ordering
        )));
    }
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(format!(
            "parameter file length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if flat.len() != meta.n_params || flat.len() != meta.spec.n_params() {
        return Err(Error::Checkpoint(format!(
            "parameter count mismatch: file {} sidecar {} spec {}",
            flat.len(),
            meta.n_params,
            meta.spec.n_params()
        )));
    }
    let mut rng = crate::rng::derive_rng(0, "checkpoint-shape", &[]);
    let model = GatModel::init(&meta.spec, &mut rng).with_flat(&flat)?;
    Ok((model, meta))
}
