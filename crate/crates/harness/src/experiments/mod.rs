pub mod contradiction;
pub mod horizontal;
pub mod vertical;

use dcshap_core::dataset::{derive_seed, partition};
use dcshap_core::dc::{
    generate_anchor, pooled_feature_ranges, train_collab_horizontal, HorizontalFit, HorizontalParams,
};
use dcshap_core::{AnchorSet, Attribution, DataMatrix, LabeledDataset};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::pipeline::stream;

/// Running count of emitted attributions and their worst efficiency gap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EfficiencyTally {
    pub explanations: usize,
    pub max_gap: f64,
}

impl EfficiencyTally {
    pub fn record(&mut self, a: &Attribution) {
        self.explanations += 1;
        self.max_gap = self.max_gap.max(a.efficiency_gap());
    }

    pub fn merge(&mut self, other: EfficiencyTally) {
        self.explanations += other.explanations;
        self.max_gap = self.max_gap.max(other.max_gap);
    }
}

pub struct HorizontalSetup {
    pub anchor: AnchorSet,
    pub fit: HorizontalFit,
}

/// Partition, pooled-range anchor, and the horizontal DC fit for one seed.
pub fn fit_horizontal(train: &LabeledDataset, cfg: &ExperimentConfig, seed: u64) -> Result<HorizontalSetup> {
    let shares = partition(train, &cfg.partition, derive_seed(seed, stream::PARTITION))?;
    let views: Vec<&DataMatrix> = shares.iter().map(|s| &s.features).collect();
    let ranges = pooled_feature_ranges(&views)?;
    let anchor = generate_anchor(&ranges, cfg.dc.anchor_size, derive_seed(seed, stream::ANCHOR))?;
    let (local_dim, collab_dim) = cfg.dc.horizontal_dims(&cfg.dataset, train.n_features());
    let params = HorizontalParams {
        local_dim,
        collab_dim,
        k: cfg.dc.k,
        positive_class: cfg.positive_class,
        target_scaling: cfg.dc.target_scaling,
        integration_form: cfg.dc.integration_form,
    };
    let fit = train_collab_horizontal(&shares, &anchor, &params)?;
    Ok(HorizontalSetup { anchor, fit })
}

pub fn phi_table(attrs: &[Attribution]) -> Vec<Vec<f64>> {
    attrs.iter().map(|a| a.phi.clone()).collect()
}
