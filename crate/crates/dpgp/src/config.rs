//! Run configuration: one JSON document with a block per pipeline stage.

use std::path::Path;

use dpgp_core::models::{ArchConfig, ModelKind, Stage, TrainConfig};
use dpgp_core::simgen::{DatasetSpec, SimConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{read_err, CliError, CliResult};

/// Evaluation and diagnostics settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Share of row pairs used by the distance report.
    pub pair_fraction: f64,
    pub pair_seed: u64,
    pub distance_stage: Stage,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            pair_fraction: 0.05,
            pair_seed: 0,
            distance_stage: Stage::Extractor,
        }
    }
}

/// Every tunable of a run. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kind: ModelKind,
    pub simgen: SimConfig,
    pub dataset: DatasetSpec,
    pub model: ArchConfig,
    pub training: TrainConfig,
    pub metrics: MetricsConfig,
    /// Worker threads for ensembles; 0 uses every available core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::SvdDngpa,
            simgen: SimConfig::default(),
            dataset: DatasetSpec::default(),
            model: ArchConfig::default(),
            training: TrainConfig::default(),
            metrics: MetricsConfig::default(),
            workers: 0,
        }
    }
}

/// Dotted paths of keys in `doc` that `reference` does not have. Objects
/// with a single key on both sides are enum variants and are not entered.
pub fn unknown_keys(doc: &Value, reference: &Value) -> Vec<String> {
    let mut out = Vec::new();
    walk(doc, reference, "", &mut out);
    out
}

fn walk(doc: &Value, reference: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(d), Value::Object(r)) = (doc, reference) else {
        return;
    };
    if d.len() == 1 && r.len() == 1 {
        return;
    }
    for (k, v) in d {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match r.get(k) {
            Some(rv) => walk(v, rv, &path, out),
            None => out.push(path),
        }
    }
}

impl RunConfig {
    /// Parses a JSON document, listing every unknown key before reporting
    /// type errors.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::invalid(format!("config: {e}")))?;
        let reference = serde_json::to_value(RunConfig::default()).expect("config serialises");
        let unknown = unknown_keys(&doc, &reference);
        if !unknown.is_empty() {
            return Err(CliError::UnknownKeys(unknown));
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(read_err(path))?)
    }

    /// The file at `path`, or the defaults.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model.validate()?;
        self.training.validate()?;
        self.simgen.validate()?;
        self.dataset.region.validate(self.simgen.trace_len)?;
        if !(self.metrics.pair_fraction > 0.0 && self.metrics.pair_fraction <= 1.0) {
            return Err(CliError::invalid("metrics.pair_fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Copy with every defaulted-by-kind value filled in.
    pub fn resolved(&self, kind: ModelKind) -> Self {
        let mut out = self.clone();
        out.kind = kind;
        out.training.adam.lr = Some(self.training.adam.resolve(kind).lr);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), RunConfig::default());
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn every_unknown_key_is_listed() {
        let err = RunConfig::from_json(r#"{"modle": {}, "model": {"latent": 3, "rff_features": 8}, "training": {"adam": {"momentum": 1}}}"#)
            .unwrap_err();
        match err {
            CliError::UnknownKeys(k) => assert_eq!(k, ["model.latent", "modle", "training.adam.momentum"]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn enum_values_are_accepted() {
        let cfg = RunConfig::from_json(r#"{"kind": "dqr", "model": {"lengthscale_init": {"fixed": 3.0}}}"#).unwrap();
        assert_eq!(cfg.kind, ModelKind::Dqr);
        assert_eq!(cfg.model.lengthscale_init, dpgp_core::models::LengthscaleInit::Fixed(3.0));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"training": {"epochs": 0}}"#), Err(CliError::Core(_))));
        assert!(matches!(RunConfig::from_json(r#"{"training": {"epochs": -1}}"#), Err(CliError::Invalid(_))));
    }
}
