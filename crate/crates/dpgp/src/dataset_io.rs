//! Dataset file pair: `features.f32` holds every sample's features as
//! little-endian `f32` in generation order; `dataset.json` describes the
//! samples, partitions, settings and fitted scaler.

use std::path::{Path, PathBuf};

use dpgp_core::signal::ScalerStats;
use dpgp_core::simgen::{Dataset, DatasetSpec, PlannedSample, SimConfig, Split};
use serde::{Deserialize, Serialize};

use crate::error::{read_err, write_err, CliError, CliResult};

pub const DATASET_FORMAT: &str = "dpgp-dataset";
pub const DATASET_VERSION: u32 = 1;
pub const SIDECAR_FILE: &str = "dataset.json";
pub const FEATURES_FILE: &str = "features.f32";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCounts {
    pub train: usize,
    pub id_test: usize,
    pub ood: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub features_file: String,
    pub sample_count: usize,
    pub feature_width: usize,
    pub counts: PartitionCounts,
    pub spec: DatasetSpec,
    pub sim: SimConfig,
    pub scaler: ScalerStats,
    /// One entry per blob row, in blob order.
    pub samples: Vec<PlannedSample>,
}

fn plan_of(d: &Dataset) -> Vec<(PlannedSample, &[f32])> {
    let mut rows = Vec::with_capacity(d.train.len() + d.id_test.len() + d.ood.len());
    for split in [Split::Train, Split::IdTest, Split::Ood] {
        let p = d.partition(split);
        for (i, (&index, &caps)) in p.sample_ids.iter().zip(&p.labels).enumerate() {
            let item = PlannedSample {
                index,
                caps,
                split,
                seed: dpgp_core::rng::derive_seed(d.sim.seed, index as u64),
            };
            rows.push((item, &p.features[i * d.width..(i + 1) * d.width]));
        }
    }
    rows.sort_by_key(|r| r.0.index);
    rows
}

/// The directory holding a dataset, given the directory or its sidecar.
pub fn dataset_dir(path: &Path) -> PathBuf {
    if path.is_file() {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        path.to_path_buf()
    }
}

pub fn save_dataset(d: &Dataset, dir: &Path) -> CliResult<Sidecar> {
    std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    let rows = plan_of(d);
    let mut blob = Vec::with_capacity(rows.len() * d.width * 4);
    for (_, f) in &rows {
        for v in *f {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sidecar = Sidecar {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        features_file: FEATURES_FILE.into(),
        sample_count: rows.len(),
        feature_width: d.width,
        counts: PartitionCounts {
            train: d.train.len(),
            id_test: d.id_test.len(),
            ood: d.ood.len(),
        },
        spec: d.spec.clone(),
        sim: d.sim.clone(),
        scaler: d.scaler.clone(),
        samples: rows.into_iter().map(|r| r.0).collect(),
    };
    let blob_path = dir.join(FEATURES_FILE);
    std::fs::write(&blob_path, blob).map_err(write_err(&blob_path))?;
    crate::report::write_json(&dir.join(SIDECAR_FILE), &sidecar)?;
    Ok(sidecar)
}

pub fn load_dataset(path: &Path) -> CliResult<Dataset> {
    let dir = dataset_dir(path);
    let side_path = dir.join(SIDECAR_FILE);
    let text = std::fs::read_to_string(&side_path).map_err(read_err(&side_path))?;
    let side: Sidecar =
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", side_path.display())))?;
    if side.format != DATASET_FORMAT || side.version != DATASET_VERSION {
        return Err(CliError::invalid(format!(
            "{}: expected {DATASET_FORMAT} v{DATASET_VERSION}, found {} v{}",
            side_path.display(),
            side.format,
            side.version
        )));
    }
    let blob_path = dir.join(&side.features_file);
    let blob = std::fs::read(&blob_path).map_err(read_err(&blob_path))?;
    let expected = side.sample_count * side.feature_width * 4;
    if blob.len() != expected || side.samples.len() != side.sample_count {
        return Err(CliError::invalid(format!(
            "{}: {} bytes for {} samples of width {} (expected {expected})",
            blob_path.display(),
            blob.len(),
            side.sample_count,
            side.feature_width
        )));
    }
    let features: Vec<Vec<f32>> = blob
        .chunks_exact(side.feature_width * 4)
        .map(|row| row.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
        .collect();
    let d = Dataset::assemble(side.spec, side.sim, &side.samples, features)?;
    if d.scaler != side.scaler {
        return Err(CliError::invalid(format!(
            "{}: stored scaler does not match the features",
            side_path.display()
        )));
    }
    Ok(d)
}
