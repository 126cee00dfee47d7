//! Data Collaboration over partitioned tabular data, with exact KernelSHAP
//! explanations that stay consistent across collaborators.
//!
//! * [`dataset`]: CSV ingest, splits, horizontal and vertical partitions.
//! * [`dc`]: anchor data, private transforms, integration maps, shared kNN.
//! * [`shap`]: exact KernelSHAP and a brute-force Shapley oracle.
//! * [`protocol`]: horizontal and vertical DC-SHAP flows with message logs.
//! * [`persist`]: versioned JSON for fitted artifacts.

pub mod dataset;
pub mod dc;
pub mod error;
pub mod knn;
mod linalg;
pub mod matrix;
pub mod persist;
pub mod protocol;
pub mod shap;

pub use dataset::{LabeledDataset, PartitionMode, PartitionSpec, PartyShare};
pub use dc::{AnchorSet, CollaborationModel, IntegrationMap, LocalTransform, PartyState, SharedModel};
pub use error::{Error, ErrorKind, Result};
pub use matrix::DataMatrix;
pub use shap::{Attribution, AttributionRole};
