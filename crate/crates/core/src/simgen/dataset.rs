use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::waveform::{inject_artifacts, simulate, SimConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, rng_for, stream};
use crate::signal::{clean_sample, extract_window, RegionSpec, ScalerStats};
use crate::LABELS;

/// Capacitance grids, split sizes and preprocessing settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    /// Per-capacitor values (pF) of the in-distribution grid.
    pub id_values: Vec<f64>,
    /// Per-capacitor values (pF) of the out-of-distribution grid.
    pub ood_values: Vec<f64>,
    pub train_count: usize,
    pub split_seed: u64,
    pub lulu_window: usize,
    pub region: RegionSpec,
}

fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = libm::round((to - from) / step) as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            id_values: grid(2900.0, 4000.0, 100.0),
            ood_values: grid(2500.0, 2800.0, 100.0),
            train_count: 1382,
            split_seed: 7,
            lulu_window: 1,
            region: RegionSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    IdTest,
    Ood,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::IdTest => "id_test",
            Split::Ood => "ood",
        }
    }
}

/// One sample to generate: its global index, labels, split and noise seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedSample {
    pub index: usize,
    pub caps: [f64; LABELS],
    pub split: Split,
    pub seed: u64,
}

fn cartesian(values: &[f64]) -> Vec<[f64; LABELS]> {
    let mut out = Vec::with_capacity(values.len().pow(3));
    for &a in values {
        for &b in values {
            for &c in values {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Enumerates the ID grid then the OOD grid, assigns the seeded train /
/// ID-test split, and derives per-sample seeds from `(sim seed, index)`.
pub fn plan_samples(spec: &DatasetSpec, sim: &SimConfig) -> Result<Vec<PlannedSample>> {
    let id = cartesian(&spec.id_values);
    let ood = cartesian(&spec.ood_values);
    if id.is_empty() || spec.train_count == 0 || spec.train_count >= id.len() {
        return Err(Error::InvalidParameter(alloc::format!(
            "train_count {} must lie in 1..{}",
            spec.train_count,
            id.len()
        )));
    }
    let mut order: Vec<usize> = (0..id.len()).collect();
    order.shuffle(&mut rng_for(spec.split_seed, stream::SPLIT));
    let mut split = alloc::vec![Split::IdTest; id.len()];
    for &i in &order[..spec.train_count] {
        split[i] = Split::Train;
    }
    let plan = id
        .into_iter()
        .zip(split)
        .chain(ood.into_iter().map(|c| (c, Split::Ood)))
        .enumerate()
        .map(|(index, (caps, split))| PlannedSample {
            index,
            caps,
            split,
            seed: derive_seed(sim.seed, index as u64),
        })
        .collect();
    Ok(plan)
}

/// simulate → inject artifacts → clean → window, rounded to `f32` storage.
pub fn process_sample(item: &PlannedSample, spec: &DatasetSpec, sim: &SimConfig) -> Result<Vec<f32>> {
    let cfg = SimConfig {
        seed: item.seed,
        ..sim.clone()
    };
    let raw = simulate(item.caps, &cfg)?;
    let dirty = inject_artifacts(&raw, &cfg);
    let clean = clean_sample(&dirty, spec.lulu_window)?;
    let window = extract_window(&clean, &spec.region)?;
    Ok(window.into_iter().map(|v| v as f32).collect())
}

/// Samples of one split, row-major `f32` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub features: Vec<f32>,
    pub labels: Vec<[f64; LABELS]>,
    /// Global sample indices (position in the generation plan).
    pub sample_ids: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Ready-to-train dataset: three disjoint partitions plus the scaler fitted
/// on the training partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub sim: SimConfig,
    pub width: usize,
    pub train: Partition,
    pub id_test: Partition,
    pub ood: Partition,
    pub scaler: ScalerStats,
}

impl Dataset {
    /// Groups processed samples into partitions and fits the scaler.
    /// `features[i]` belongs to `plan[i]`.
    pub fn assemble(
        spec: DatasetSpec,
        sim: SimConfig,
        plan: &[PlannedSample],
        features: Vec<Vec<f32>>,
    ) -> Result<Self> {
        let width = spec.region.feature_width();
        let empty = || Partition {
            features: Vec::new(),
            labels: Vec::new(),
            sample_ids: Vec::new(),
        };
        let (mut train, mut id_test, mut ood) = (empty(), empty(), empty());
        for (item, f) in plan.iter().zip(features) {
            if f.len() != width {
                return Err(Error::DimensionMismatch {
                    op: "dataset_assemble",
                    left: (1, f.len()),
                    right: (1, width),
                });
            }
            let part = match item.split {
                Split::Train => &mut train,
                Split::IdTest => &mut id_test,
                Split::Ood => &mut ood,
            };
            part.features.extend_from_slice(&f);
            part.labels.push(item.caps);
            part.sample_ids.push(item.index);
        }
        let scaler = ScalerStats::fit(&train.features, width, &train.labels)?;
        Ok(Self {
            spec,
            sim,
            width,
            train,
            id_test,
            ood,
            scaler,
        })
    }

    pub fn partition(&self, split: Split) -> &Partition {
        match split {
            Split::Train => &self.train,
            Split::IdTest => &self.id_test,
            Split::Ood => &self.ood,
        }
    }

    /// Standardised features of a split.
    pub fn features(&self, split: Split) -> Matrix {
        self.scaler
            .apply_features(&self.partition(split).features)
            .expect("partition width matches scaler")
    }

    /// Standardised labels of a split.
    pub fn labels(&self, split: Split) -> Matrix {
        self.scaler.apply_labels(&self.partition(split).labels)
    }
}

/// Generates, cleans, windows and standardises the full dataset.
pub fn build_dataset(spec: &DatasetSpec, sim: &SimConfig) -> Result<Dataset> {
    spec.region.validate(sim.trace_len)?;
    let plan = plan_samples(spec, sim)?;
    let features = plan
        .iter()
        .map(|p| process_sample(p, spec, sim))
        .collect::<Result<Vec<_>>>()?;
    Dataset::assemble(spec.clone(), sim.clone(), &plan, features)
}
