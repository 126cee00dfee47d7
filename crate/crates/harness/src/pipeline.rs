//! Data preparation shared by every experiment.

use dcshap_core::dataset::{derive_seed, hold_out, preprocess_adult, split_train_test, Manifest};
use dcshap_core::protocol::{Aggregate, ReferenceOrigin, ReferenceValue};
use dcshap_core::{DataMatrix, LabeledDataset};

use crate::config::{ExperimentConfig, ADULT};
use crate::error::{HarnessError, Result};

/// Random streams derived from a run seed.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const HOLD_OUT: u64 = 2;
    pub const PARTITION: u64 = 3;
    pub const ANCHOR: u64 = 4;
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    let manifest = Manifest::load(&cfg.manifest)?;
    if manifest.entry(&cfg.dataset).is_none() {
        let known: Vec<&str> = manifest.names().collect();
        return Err(HarnessError::config(format!(
            "unknown dataset `{}` (known: {})",
            cfg.dataset,
            known.join(", ")
        )));
    }
    let ds = manifest.load_dataset(&cfg.dataset)?;
    if cfg.dataset == ADULT {
        Ok(preprocess_adult(&ds)?)
    } else {
        Ok(ds)
    }
}

pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Rows set aside from training when `validation_size > 0`.
    pub validation: Option<LabeledDataset>,
}

pub fn split(ds: &LabeledDataset, cfg: &ExperimentConfig, seed: u64) -> Result<Split> {
    if cfg.positive_class >= ds.n_classes() {
        return Err(HarnessError::config(format!(
            "positive_class {} but `{}` has {} classes",
            cfg.positive_class,
            cfg.dataset,
            ds.n_classes()
        )));
    }
    let (train, test) = split_train_test(ds, cfg.test_fraction, derive_seed(seed, stream::SPLIT))?;
    if cfg.validation_size == 0 {
        return Ok(Split {
            train,
            test,
            validation: None,
        });
    }
    let (train, validation) = hold_out(&train, cfg.validation_size, derive_seed(seed, stream::HOLD_OUT))?;
    Ok(Split {
        train,
        test,
        validation: Some(validation),
    })
}

/// Reference computed by a party from its own rows.
pub fn own_data_reference(data: &DataMatrix, aggregate: Aggregate) -> Result<ReferenceValue> {
    if data.rows() == 0 {
        return Err(HarnessError::config("party holds no rows"));
    }
    let values = match aggregate {
        Aggregate::Median => data.column_medians(),
        Aggregate::Mean => data.column_means(),
    };
    Ok(ReferenceValue {
        values,
        origin: ReferenceOrigin::PartyData,
    })
}

/// The first `n` rows, or all of them when fewer exist.
pub fn leading_rows(ds: &LabeledDataset, n: usize) -> LabeledDataset {
    let idx: Vec<usize> = (0..n.min(ds.len())).collect();
    ds.select_rows(&idx)
}
