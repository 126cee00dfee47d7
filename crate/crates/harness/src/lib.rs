//! Experiment harness: horizontal consistency study, biased-split
//! contradiction demo, and vertical full/partial comparison, each writing
//! CSV, JSON and SVG artifacts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};

use std::path::PathBuf;

/// Runs one experiment and writes its artifacts. Returns the files written.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(kind)?;
    let mut out = report::Emitter::new(&cfg.output_dir)?;
    match kind {
        ExperimentKind::DemoContradiction => {
            for outcome in experiments::contradiction::run(cfg)? {
                experiments::contradiction::emit(&outcome, &mut out)?;
            }
        }
        ExperimentKind::HorizontalConsistency => {
            let report = experiments::horizontal::run(cfg)?;
            experiments::horizontal::emit(&report, &mut out)?;
        }
        ExperimentKind::VerticalConsistency => {
            for outcome in experiments::vertical::run(cfg)? {
                experiments::vertical::emit(&outcome, &mut out)?;
            }
        }
    }
    Ok(out.written().to_vec())
}
