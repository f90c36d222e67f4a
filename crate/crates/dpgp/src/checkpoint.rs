//! Model checkpoints: `model.json` names every tensor with its shape and
//! offset into `model.f64`, a blob of little-endian `f64` values.

use std::path::{Path, PathBuf};

use dpgp_core::models::{ModelAssembly, ModelKind, ModelMeta, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{read_err, write_err, CliError, CliResult};

pub const CHECKPOINT_FORMAT: &str = "dpgp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "model.f64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset into the blob, in values.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub weights_file: String,
    pub value_count: usize,
    pub meta: ModelMeta,
    pub tensors: Vec<TensorEntry>,
}

/// The directory holding a checkpoint, given the directory or its manifest.
pub fn checkpoint_dir(path: &Path) -> PathBuf {
    crate::dataset_io::dataset_dir(path)
}

pub fn save_checkpoint(model: &ModelAssembly, dir: &Path) -> CliResult<Manifest> {
    std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    let tensors = model.export_tensors();
    let mut entries = Vec::with_capacity(tensors.len());
    let mut blob = Vec::new();
    let mut offset = 0;
    for t in &tensors {
        entries.push(TensorEntry {
            name: t.name.clone(),
            rows: t.rows,
            cols: t.cols,
            offset,
        });
        offset += t.data.len();
        for v in &t.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        weights_file: WEIGHTS_FILE.into(),
        value_count: offset,
        meta: model.meta(),
        tensors: entries,
    };
    let blob_path = dir.join(WEIGHTS_FILE);
    std::fs::write(&blob_path, blob).map_err(write_err(&blob_path))?;
    crate::report::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Loads a checkpoint; with `expect`, a model of another kind is refused.
pub fn load_checkpoint(path: &Path, expect: Option<ModelKind>) -> CliResult<ModelAssembly> {
    let dir = checkpoint_dir(path);
    let man_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&man_path).map_err(read_err(&man_path))?;
    let man: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", man_path.display())))?;
    if man.format != CHECKPOINT_FORMAT || man.version != CHECKPOINT_VERSION {
        return Err(CliError::invalid(format!(
            "{}: expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
            man_path.display(),
            man.format,
            man.version
        )));
    }
    if let Some(kind) = expect {
        if kind != man.meta.kind {
            return Err(CliError::invalid(format!(
                "checkpoint holds a {} model, expected {}",
                man.meta.kind.name(),
                kind.name()
            )));
        }
    }
    let blob_path = dir.join(&man.weights_file);
    let blob = std::fs::read(&blob_path).map_err(read_err(&blob_path))?;
    if blob.len() != man.value_count * 8 {
        return Err(CliError::invalid(format!(
            "{}: {} bytes, manifest expects {}",
            blob_path.display(),
            blob.len(),
            man.value_count * 8
        )));
    }
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    let mut tensors = Vec::with_capacity(man.tensors.len());
    for e in &man.tensors {
        let len = e.rows * e.cols;
        let data = values
            .get(e.offset..e.offset + len)
            .ok_or_else(|| CliError::invalid(format!("tensor {} lies outside the weight blob", e.name)))?;
        tensors.push(Tensor {
            name: e.name.clone(),
            rows: e.rows,
            cols: e.cols,
            data: data.to_vec(),
        });
    }
    Ok(ModelAssembly::import(&man.meta, &tensors)?)
}
