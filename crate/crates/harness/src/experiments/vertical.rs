//! Vertical collaboration: third-party full explanations against host and
//! guest partial explanations of the same test samples.

use dcshap_core::dataset::partition;
use dcshap_core::dc::{train_collab_vertical, SharedModel, VerticalParams};
use dcshap_core::protocol::{
    explain_vertical_full, explain_vertical_partial, MessageLog, Participant, ReferenceOrigin, ReferenceValue,
    VerticalExplainContext, VerticalRole,
};
use dcshap_core::{Attribution, DataMatrix, LabeledDataset, PartyState};
use serde::Serialize;

use super::EfficiencyTally;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::pipeline::{leading_rows, load_dataset, own_data_reference, split, stream};
use crate::report::{num, opt_num, Emitter};
use crate::stats::pearson;
use crate::svg;

#[derive(Debug, Clone, Serialize)]
pub struct SampleExplanations {
    pub sample: usize,
    pub full: Attribution,
    pub host: Attribution,
    pub guest: Attribution,
    /// Host's aggregated indicator minus the sum of the full explanation's
    /// guest-feature attributions.
    pub host_dc_features_gap: f64,
    /// Largest pairwise difference between the three explanations' totals.
    pub total_spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureAgreement {
    pub feature: String,
    pub owner: VerticalRole,
    /// Column in the full feature order.
    pub column: usize,
    /// Position inside the owner's partial explanation.
    pub local_index: usize,
    /// Pearson correlation of full vs partial attributions; absent when one
    /// side is constant over the explained samples.
    pub correlation: Option<f64>,
    pub max_abs_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerticalOutcome {
    pub dataset: String,
    pub seed: u64,
    pub local_dims: Vec<usize>,
    pub accuracy: f64,
    pub reference: ReferenceValue,
    pub feature_names: Vec<String>,
    pub agreement: Vec<FeatureAgreement>,
    /// No payload between the two parties had either party's raw width.
    pub privacy_preserved: bool,
    pub efficiency: EfficiencyTally,
    pub samples: Vec<SampleExplanations>,
    #[serde(skip)]
    pub log: MessageLog,
}

fn unified_rows(states: &[PartyState], x: &DataMatrix) -> Result<DataMatrix> {
    let reps = states
        .iter()
        .map(|s| s.represent(&x.col_range(s.share.columns.clone())))
        .collect::<dcshap_core::Result<Vec<_>>>()?;
    let blocks: Vec<&DataMatrix> = reps.iter().collect();
    Ok(DataMatrix::hstack(&blocks)?)
}

/// Every party supplies the aggregate of its own training block; the
/// concatenation is the agreed reference.
fn agreed_reference(states: &[PartyState], cfg: &ExperimentConfig) -> Result<ReferenceValue> {
    let mut values = Vec::new();
    for s in states {
        values.extend(own_data_reference(&s.share.features, cfg.dc.reference)?.values);
    }
    Ok(ReferenceValue {
        values,
        origin: ReferenceOrigin::Supplied,
    })
}

pub fn run_seed(cfg: &ExperimentConfig, ds: &LabeledDataset, seed: u64) -> Result<VerticalOutcome> {
    let data = split(ds, cfg, seed)?;
    let shares = partition(
        &data.train,
        &cfg.partition,
        dcshap_core::dataset::derive_seed(seed, stream::PARTITION),
    )?;
    let widths: Vec<usize> = shares.iter().map(|s| s.features.cols()).collect();
    let local_dims = cfg.dc.vertical_dims(&widths);
    let params = VerticalParams {
        local_dims: local_dims.clone(),
        k: cfg.dc.k,
        positive_class: cfg.positive_class,
    };
    let (model, states) = train_collab_vertical(&shares, &params)?;

    let predicted = model.predict_class(&unified_rows(&states, &data.test.features)?)?;
    let hits = predicted.iter().zip(&data.test.labels).filter(|(p, l)| p == l).count();
    let accuracy = hits as f64 / data.test.len() as f64;

    let reference = agreed_reference(&states, cfg)?;
    let (host_cols, guest_cols) = (states[0].share.columns.clone(), states[1].share.columns.clone());
    let r = &reference.values;
    let samples = leading_rows(&data.test, cfg.n_explain);

    let mut log = MessageLog::default();
    let mut efficiency = EfficiencyTally::default();
    let mut explained = Vec::with_capacity(samples.len());
    for (i, x) in samples.features.iter_rows().enumerate() {
        let full = explain_vertical_full(&states, &model, x, &reference, &mut log)?;
        let ctx = VerticalExplainContext::negotiate(
            &states,
            VerticalRole::Host,
            &x[guest_cols.clone()],
            &r[guest_cols.clone()],
            &mut log,
        )?;
        let host = explain_vertical_partial(&ctx, &model, &x[host_cols.clone()], &r[host_cols.clone()], &mut log)?;
        let ctx = VerticalExplainContext::negotiate(
            &states,
            VerticalRole::Guest,
            &x[host_cols.clone()],
            &r[host_cols.clone()],
            &mut log,
        )?;
        let guest = explain_vertical_partial(&ctx, &model, &x[guest_cols.clone()], &r[guest_cols.clone()], &mut log)?;
        for a in [&full, &host, &guest] {
            efficiency.record(a);
        }
        let totals: Vec<f64> = [&full, &host, &guest]
            .iter()
            .map(|a| a.base + a.phi.iter().sum::<f64>())
            .collect();
        let spread = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - totals.iter().copied().fold(f64::INFINITY, f64::min);
        let guest_sum: f64 = full.phi[guest_cols.clone()].iter().sum();
        explained.push(SampleExplanations {
            sample: i,
            host_dc_features_gap: host.phi[host_cols.len()] - guest_sum,
            total_spread: spread,
            full,
            host,
            guest,
        });
    }

    let names = ds.features.feature_names().to_vec();
    let mut agreement = Vec::with_capacity(names.len());
    for (owner, cols) in [(VerticalRole::Host, &host_cols), (VerticalRole::Guest, &guest_cols)] {
        for (local, j) in cols.clone().enumerate() {
            let full: Vec<f64> = explained.iter().map(|s| s.full.phi[j]).collect();
            let partial: Vec<f64> = explained
                .iter()
                .map(|s| match owner {
                    VerticalRole::Host => s.host.phi[local],
                    VerticalRole::Guest => s.guest.phi[local],
                })
                .collect();
            let max_abs_difference = full
                .iter()
                .zip(&partial)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            agreement.push(FeatureAgreement {
                feature: names[j].clone(),
                owner,
                column: j,
                local_index: local,
                correlation: pearson(&full, &partial),
                max_abs_difference,
            });
        }
    }

    let (host, guest) = (
        Participant::Party(states[0].party_id),
        Participant::Party(states[1].party_id),
    );
    let privacy_preserved =
        !log.leaks_width(guest, host, guest_cols.len()) && !log.leaks_width(host, guest, host_cols.len());
    Ok(VerticalOutcome {
        dataset: cfg.dataset.clone(),
        seed,
        local_dims,
        accuracy,
        reference,
        feature_names: names,
        agreement,
        privacy_preserved,
        efficiency,
        samples: explained,
        log,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<VerticalOutcome>> {
    cfg.validate(ExperimentKind::VerticalConsistency)?;
    let ds = load_dataset(cfg)?;
    cfg.partition.validate(ds.n_features())?;
    cfg.seeds.iter().map(|&s| run_seed(cfg, &ds, s)).collect()
}

pub fn emit(outcome: &VerticalOutcome, out: &mut Emitter) -> Result<()> {
    let stem = format!("vertical_{}_seed{}", outcome.dataset, outcome.seed);
    let rows: Vec<Vec<String>> = outcome
        .agreement
        .iter()
        .map(|a| {
            let owner = match a.owner {
                VerticalRole::Host => "host",
                VerticalRole::Guest => "guest",
            };
            vec![
                a.feature.clone(),
                owner.to_owned(),
                opt_num(a.correlation),
                num(a.max_abs_difference),
            ]
        })
        .collect();
    out.csv(
        &format!("{stem}_correlation.csv"),
        &["feature", "owner", "full_vs_partial_correlation", "max_abs_difference"],
        &rows,
    )?;

    let mut header = vec![
        "sample".to_owned(),
        "method".to_owned(),
        "base".to_owned(),
        "predicted".to_owned(),
    ];
    header.extend(outcome.feature_names.iter().cloned());
    header.push(dcshap_core::protocol::DC_FEATURES.to_owned());
    let width = outcome.feature_names.len();
    let mut rows = Vec::new();
    for s in &outcome.samples {
        let (h, g) = (s.host.phi.len() - 1, s.guest.phi.len() - 1);
        let mut full = vec![
            s.sample.to_string(),
            "full".into(),
            num(s.full.base),
            num(s.full.predicted),
        ];
        full.extend(s.full.phi.iter().map(|&v| num(v)));
        full.push(String::new());
        let mut host = vec![
            s.sample.to_string(),
            "host_partial".into(),
            num(s.host.base),
            num(s.host.predicted),
        ];
        host.extend(s.host.phi[..h].iter().map(|&v| num(v)));
        host.extend(std::iter::repeat_n(String::new(), width - h));
        host.push(num(s.host.phi[h]));
        let mut guest = vec![
            s.sample.to_string(),
            "guest_partial".into(),
            num(s.guest.base),
            num(s.guest.predicted),
        ];
        guest.extend(std::iter::repeat_n(String::new(), width - g));
        guest.extend(s.guest.phi[..g].iter().map(|&v| num(v)));
        guest.push(num(s.guest.phi[g]));
        rows.extend([full, host, guest]);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(&format!("{stem}_attributions.csv"), &header_refs, &rows)?;
    out.json(&format!("{stem}_report.json"), outcome)?;
    out.json(&format!("{stem}_messages.json"), &outcome.log)?;

    let columns: Vec<(Vec<f64>, Vec<f64>)> = outcome
        .agreement
        .iter()
        .map(|a| {
            outcome
                .samples
                .iter()
                .map(|s| {
                    let partial = match a.owner {
                        VerticalRole::Host => &s.host,
                        VerticalRole::Guest => &s.guest,
                    };
                    (s.full.phi[a.column], partial.phi[a.local_index])
                })
                .unzip()
        })
        .collect();
    let panels: Vec<svg::ScatterPanel<'_>> = outcome
        .agreement
        .iter()
        .zip(&columns)
        .map(|(a, (x, y))| svg::ScatterPanel {
            title: a.feature.clone(),
            x,
            y,
        })
        .collect();
    let chart = svg::scatter_grid(
        &format!("Full vs partial attributions: {}", outcome.dataset),
        "third-party full",
        "owner partial",
        &panels,
        4,
    );
    out.text(&format!("{stem}_scatter.svg"), &chart)?;

    for s in &outcome.samples {
        let chart = svg::force_plot(
            &format!("Sample {}: host partial explanation", s.sample),
            s.host.base,
            s.host.predicted,
            &s.host.names,
            &s.host.phi,
        );
        out.text(&format!("{stem}_sample{}_host_force.svg", s.sample), &chart)?;
    }
    Ok(())
}
