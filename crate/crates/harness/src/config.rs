//! Experiment configuration. A JSON file only needs the keys it changes;
//! everything else comes from the per-experiment defaults.

use std::path::{Path, PathBuf};

use dcshap_core::dataset::FeatureBlock;
use dcshap_core::dc::{IntegrationForm, TargetScaling};
use dcshap_core::protocol::Aggregate;
use dcshap_core::{PartitionMode, PartitionSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{HarnessError, Result};

pub const ADULT: &str = "adult";
/// Intermediate and collaboration dimension used for Adult.
pub const ADULT_DIM: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DemoContradiction,
    HorizontalConsistency,
    VerticalConsistency,
}

impl ExperimentKind {
    /// Prefix used in every emitted file name.
    pub fn slug(self) -> &'static str {
        match self {
            Self::DemoContradiction => "contradiction",
            Self::HorizontalConsistency => "horizontal",
            Self::VerticalConsistency => "vertical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcConfig {
    /// `d_i` for horizontal runs. Defaults to `ceil(3n/4)`, or 9 for Adult.
    pub local_dim: Option<usize>,
    /// `d̂`. Defaults to the local dimension.
    pub collab_dim: Option<usize>,
    /// Per-party `d_i` for vertical runs. Defaults to `ceil(3 n_i / 4)`.
    pub local_dims: Option<Vec<usize>>,
    pub anchor_size: usize,
    pub k: usize,
    pub target_scaling: TargetScaling,
    pub integration_form: IntegrationForm,
    /// Aggregate used to turn a sample set into a reference vector.
    pub reference: Aggregate,
}

impl Default for DcConfig {
    fn default() -> Self {
        Self {
            local_dim: None,
            collab_dim: None,
            local_dims: None,
            anchor_size: 2000,
            k: 7,
            target_scaling: TargetScaling::default(),
            integration_form: IntegrationForm::default(),
            reference: Aggregate::default(),
        }
    }
}

impl DcConfig {
    pub fn horizontal_dims(&self, dataset: &str, n_features: usize) -> (usize, usize) {
        let local = self.local_dim.unwrap_or_else(|| default_dim(dataset, n_features));
        (local, self.collab_dim.unwrap_or(local))
    }

    pub fn vertical_dims(&self, block_widths: &[usize]) -> Vec<usize> {
        self.local_dims
            .clone()
            .unwrap_or_else(|| block_widths.iter().map(|&w| three_quarters(w)).collect())
    }
}

fn three_quarters(n: usize) -> usize {
    (3 * n).div_ceil(4)
}

pub fn default_dim(dataset: &str, n_features: usize) -> usize {
    if dataset == ADULT {
        ADULT_DIM.min(n_features)
    } else {
        three_quarters(n_features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    /// Dataset manifest; relative paths resolve against the working directory.
    pub manifest: PathBuf,
    pub partition: PartitionSpec,
    pub dc: DcConfig,
    pub seeds: Vec<u64>,
    pub n_explain: usize,
    /// Fraction of rows held out as the test set.
    pub test_fraction: f64,
    /// Rows removed from the training set before partitioning.
    pub validation_size: usize,
    /// Class whose probability is explained.
    pub positive_class: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind, dataset: &str) -> Self {
        let (partition, seeds, n_explain, validation_size) = match kind {
            ExperimentKind::DemoContradiction => (PartitionSpec::biased(0.9), vec![0], 100, 100),
            ExperimentKind::HorizontalConsistency => (PartitionSpec::horizontal(2), (0..10).collect(), 50, 0),
            ExperimentKind::VerticalConsistency => (
                PartitionSpec::vertical(vec![FeatureBlock(0, 5), FeatureBlock(6, 11)]),
                vec![0],
                100,
                0,
            ),
        };
        Self {
            dataset: dataset.to_owned(),
            manifest: PathBuf::from("data/manifest.json"),
            partition,
            dc: DcConfig::default(),
            seeds,
            n_explain,
            test_fraction: 1.0 / 3.0,
            validation_size,
            positive_class: 1,
            output_dir: PathBuf::from("out").join(kind.slug()),
        }
    }

    /// Overlays a partial JSON document on the defaults for `kind`.
    pub fn from_json(kind: ExperimentKind, text: &str) -> std::result::Result<Self, serde_json::Error> {
        let overlay: Value = serde_json::from_str(text)?;
        let dataset = overlay.get("dataset").and_then(Value::as_str).unwrap_or(ADULT);
        let mut base = serde_json::to_value(Self::defaults(kind, dataset))?;
        merge(&mut base, overlay);
        serde_json::from_value(base)
    }

    pub fn load(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(kind, &text).map_err(|source| HarnessError::ConfigParse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds must not be empty"));
        }
        if self.n_explain == 0 {
            return Err(HarnessError::config("n_explain must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(HarnessError::config(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        if self.dc.k == 0 || self.dc.anchor_size == 0 {
            return Err(HarnessError::config("dc.k and dc.anchor_size must be positive"));
        }
        let p = &self.partition;
        match kind {
            ExperimentKind::DemoContradiction => {
                if p.mode != PartitionMode::Horizontal || p.party_count != 2 || p.bias.is_none() {
                    return Err(HarnessError::config(
                        "demo-contradiction needs a biased two-party horizontal partition",
                    ));
                }
            }
            ExperimentKind::HorizontalConsistency => {
                if p.mode != PartitionMode::Horizontal || p.party_count < 2 {
                    return Err(HarnessError::config(
                        "horizontal-consistency needs a horizontal partition with at least two parties",
                    ));
                }
            }
            ExperimentKind::VerticalConsistency => {
                if p.mode != PartitionMode::Vertical || p.party_count != 2 {
                    return Err(HarnessError::config(
                        "vertical-consistency needs a two-party vertical partition (host, guest)",
                    ));
                }
            }
        }
        Ok(())
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_keeps_defaults() {
        let cfg = ExperimentConfig::from_json(
            ExperimentKind::HorizontalConsistency,
            r#"{"dataset": "iris", "seeds": [3], "dc": {"k": 5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.dataset, "iris");
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.dc.k, 5);
        assert_eq!(cfg.dc.anchor_size, 2000);
        assert_eq!(cfg.n_explain, 50);
        assert_eq!(cfg.partition, PartitionSpec::horizontal(2));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(ExperimentKind::VerticalConsistency, r#"{"seed": 1}"#).is_err());
    }

    #[test]
    fn default_dims() {
        let dc = DcConfig::default();
        assert_eq!(dc.horizontal_dims("iris", 4), (3, 3));
        assert_eq!(dc.horizontal_dims("wine", 13), (10, 10));
        assert_eq!(dc.horizontal_dims(ADULT, 12), (9, 9));
        assert_eq!(dc.vertical_dims(&[6, 6]), vec![5, 5]);
    }

    #[test]
    fn validation_catches_mismatched_partition() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::VerticalConsistency, ADULT);
        cfg.validate(ExperimentKind::VerticalConsistency).unwrap();
        cfg.partition = PartitionSpec::horizontal(2);
        assert_eq!(
            cfg.validate(ExperimentKind::VerticalConsistency)
                .unwrap_err()
                .exit_code(),
            1
        );
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::HorizontalConsistency, "iris");
        cfg.seeds.clear();
        assert!(cfg.validate(ExperimentKind::HorizontalConsistency).is_err());
    }
}
