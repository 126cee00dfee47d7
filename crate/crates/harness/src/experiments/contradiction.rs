//! Biased two-user split: how often do the users' attributions for the same
//! validation sample point in opposite directions?

use dcshap_core::dc::accuracy;
use dcshap_core::protocol::{anchor_reference, explain_party};
use dcshap_core::{Attribution, AttributionRole, LabeledDataset};
use serde::Serialize;

use super::horizontal::Method;
use super::{fit_horizontal, EfficiencyTally};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::pipeline::{leading_rows, load_dataset, own_data_reference, split};
use crate::report::{num, Emitter};
use crate::svg;

/// Attributions smaller than this are treated as zero when looking for
/// opposite signs, so solver round-off cannot count as a contradiction.
pub const SIGN_TOLERANCE: f64 = 1e-9;

/// Number of most-contradictory samples that get plots.
pub const PLOTTED_SAMPLES: usize = 2;

pub fn contradictions(a: &Attribution, b: &Attribution) -> usize {
    a.phi
        .iter()
        .zip(&b.phi)
        .filter(|(x, y)| x.abs() > SIGN_TOLERANCE && y.abs() > SIGN_TOLERANCE && x.signum() != y.signum())
        .count()
}

#[derive(Debug, Clone, Serialize)]
pub struct PartySummary {
    pub rows: usize,
    pub positive_rate: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    /// Row of the validation set.
    pub sample: usize,
    pub kernelshap: [Attribution; 2],
    pub dcshap: [Attribution; 2],
    pub kernelshap_contradictions: usize,
    pub dcshap_contradictions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContradictionOutcome {
    pub dataset: String,
    pub seed: u64,
    pub bias: f64,
    pub parties: Vec<PartySummary>,
    pub feature_names: Vec<String>,
    pub kernelshap_contradictions: usize,
    pub dcshap_contradictions: usize,
    /// Samples chosen for plots, most KernelSHAP contradictions first.
    pub plotted: Vec<usize>,
    pub efficiency: EfficiencyTally,
    pub samples: Vec<SampleOutcome>,
}

fn party_pair(
    parties: &[dcshap_core::PartyState],
    model: &dcshap_core::CollaborationModel,
    x: &[f64],
    refs: &[dcshap_core::protocol::ReferenceValue],
    tally: &mut EfficiencyTally,
) -> Result<[Attribution; 2]> {
    let a = explain_party(&parties[0], model, x, &refs[0], AttributionRole::Horizontal)?;
    let b = explain_party(&parties[1], model, x, &refs[1], AttributionRole::Horizontal)?;
    tally.record(&a);
    tally.record(&b);
    Ok([a, b])
}

pub fn run_seed(cfg: &ExperimentConfig, ds: &LabeledDataset, seed: u64) -> Result<ContradictionOutcome> {
    let data = split(ds, cfg, seed)?;
    let validation = data
        .validation
        .ok_or_else(|| HarnessError::config("demo-contradiction needs validation_size > 0"))?;
    let samples = leading_rows(&validation, cfg.n_explain);
    let setup = fit_horizontal(&data.train, cfg, seed)?;
    let (model, parties) = (&setup.fit.model, &setup.fit.parties);

    let mut summaries = Vec::new();
    for p in parties {
        let labels = p.share.to_labeled().expect("horizontal parties hold labels");
        summaries.push(PartySummary {
            rows: p.share.rows(),
            positive_rate: labels.class_rate(cfg.positive_class),
            test_accuracy: accuracy(model, p, &data.test)?,
        });
    }

    let own = parties
        .iter()
        .map(|p| own_data_reference(&p.share.features, cfg.dc.reference))
        .collect::<Result<Vec<_>>>()?;
    let shared = anchor_reference(&setup.anchor, cfg.dc.reference)?;
    let shared = vec![shared.clone(), shared];

    let mut efficiency = EfficiencyTally::default();
    let mut outcomes = Vec::with_capacity(samples.len());
    for (i, x) in samples.features.iter_rows().enumerate() {
        let kernelshap = party_pair(parties, model, x, &own, &mut efficiency)?;
        let dcshap = party_pair(parties, model, x, &shared, &mut efficiency)?;
        outcomes.push(SampleOutcome {
            sample: i,
            kernelshap_contradictions: contradictions(&kernelshap[0], &kernelshap[1]),
            dcshap_contradictions: contradictions(&dcshap[0], &dcshap[1]),
            kernelshap,
            dcshap,
        });
    }

    let mut ranked: Vec<&SampleOutcome> = outcomes.iter().collect();
    ranked.sort_by(|a, b| {
        b.kernelshap_contradictions
            .cmp(&a.kernelshap_contradictions)
            .then(a.sample.cmp(&b.sample))
    });
    Ok(ContradictionOutcome {
        dataset: cfg.dataset.clone(),
        seed,
        bias: cfg.partition.bias.unwrap_or_default(),
        parties: summaries,
        feature_names: ds.features.feature_names().to_vec(),
        kernelshap_contradictions: outcomes.iter().map(|o| o.kernelshap_contradictions).sum(),
        dcshap_contradictions: outcomes.iter().map(|o| o.dcshap_contradictions).sum(),
        plotted: ranked.iter().take(PLOTTED_SAMPLES).map(|o| o.sample).collect(),
        efficiency,
        samples: outcomes,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ContradictionOutcome>> {
    cfg.validate(ExperimentKind::DemoContradiction)?;
    let ds = load_dataset(cfg)?;
    cfg.seeds.iter().map(|&s| run_seed(cfg, &ds, s)).collect()
}

pub fn emit(outcome: &ContradictionOutcome, out: &mut Emitter) -> Result<()> {
    let stem = format!("contradiction_{}_seed{}", outcome.dataset, outcome.seed);
    let rows: Vec<Vec<String>> = outcome
        .samples
        .iter()
        .map(|s| {
            vec![
                s.sample.to_string(),
                num(s.kernelshap[0].predicted),
                num(s.kernelshap[1].predicted),
                s.kernelshap_contradictions.to_string(),
                s.dcshap_contradictions.to_string(),
            ]
        })
        .collect();
    out.csv(
        &format!("{stem}_counts.csv"),
        &[
            "sample",
            "user1_prediction",
            "user2_prediction",
            "kernelshap_contradictions",
            "dcshap_contradictions",
        ],
        &rows,
    )?;
    out.json(&format!("{stem}_report.json"), outcome)?;

    for &i in &outcome.plotted {
        let s = &outcome.samples[i];
        for (method, pair) in [(Method::KernelShap, &s.kernelshap), (Method::DcShap, &s.dcshap)] {
            let title = format!("Sample {i}, {}: user 1 vs user 2", method_label(method));
            let chart = svg::paired_bars(
                &title,
                &outcome.feature_names,
                ("User 1", &pair[0].phi),
                ("User 2", &pair[1].phi),
            );
            out.text(&format!("{stem}_sample{i}_{}.svg", method.slug()), &chart)?;
        }
    }
    Ok(())
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::KernelShap => "KernelSHAP (own-data baseline)",
        Method::DcShap => "DC-SHAP (anchor baseline)",
    }
}
