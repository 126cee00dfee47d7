//! Two-user attribution consistency under an iid horizontal split.

use dcshap_core::dc::accuracy;
use dcshap_core::protocol::{anchor_reference, compare_attributions_rmse, explain_party};
use dcshap_core::{Attribution, AttributionRole, LabeledDataset};
use serde::Serialize;

use super::{fit_horizontal, phi_table, EfficiencyTally};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::pipeline::{leading_rows, load_dataset, own_data_reference, split};
use crate::report::{num, opt_num, seed_tag, Emitter};
use crate::stats::{mean, std_dev};
use crate::svg;

pub const TABLE_HEADER: [&str; 7] = [
    "dataset",
    "n_features",
    "dc_accuracy",
    "kernelshap_rmse_mean",
    "kernelshap_rmse_std",
    "dcshap_rmse_mean",
    "dcshap_rmse_std",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Each user explains with the median of its own training rows.
    KernelShap,
    /// Each user explains with the median of the shared anchor.
    DcShap,
}

impl Method {
    pub fn slug(self) -> &'static str {
        match self {
            Self::KernelShap => "kernelshap",
            Self::DcShap => "dcshap",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub party_sizes: Vec<usize>,
    pub party_accuracies: Vec<f64>,
    pub accuracy: f64,
    pub kernelshap_feature_rmse: Vec<f64>,
    pub dcshap_feature_rmse: Vec<f64>,
    pub kernelshap_rmse: f64,
    pub dcshap_rmse: f64,
    pub integration_residuals: Vec<f64>,
    #[serde(skip)]
    pub attributions: Vec<(Method, Vec<Vec<Attribution>>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Present only when at least two seeds ran.
    pub std: Option<f64>,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            std: std_dev(xs),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub dataset: String,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub seeds: Vec<u64>,
    pub n_explain: usize,
    pub dc_accuracy: MeanStd,
    pub kernelshap_rmse: MeanStd,
    pub dcshap_rmse: MeanStd,
    pub kernelshap_feature_rmse: Vec<MeanStd>,
    pub dcshap_feature_rmse: Vec<MeanStd>,
    pub efficiency: EfficiencyTally,
    pub per_seed: Vec<SeedOutcome>,
}

impl ConsistencyReport {
    pub fn improvement_factor(&self) -> f64 {
        self.kernelshap_rmse.mean / self.dcshap_rmse.mean
    }

    pub fn table_row(&self) -> Vec<String> {
        vec![
            self.dataset.clone(),
            self.n_features.to_string(),
            num(self.dc_accuracy.mean),
            num(self.kernelshap_rmse.mean),
            opt_num(self.kernelshap_rmse.std),
            num(self.dcshap_rmse.mean),
            opt_num(self.dcshap_rmse.std),
        ]
    }
}

/// Mean over all unordered party pairs of the per-feature RMSE.
fn pairwise_feature_rmse(per_party: &[Vec<Attribution>]) -> Result<Vec<f64>> {
    let mut total: Option<Vec<f64>> = None;
    let mut pairs = 0;
    for i in 0..per_party.len() {
        for j in i + 1..per_party.len() {
            let rmse = compare_attributions_rmse(&phi_table(&per_party[i]), &phi_table(&per_party[j]))?;
            match total.as_mut() {
                None => total = Some(rmse),
                Some(t) => t.iter_mut().zip(&rmse).for_each(|(a, b)| *a += b),
            }
            pairs += 1;
        }
    }
    let total = total.unwrap_or_default();
    Ok(total.into_iter().map(|v| v / pairs as f64).collect())
}

pub fn run_seed(
    cfg: &ExperimentConfig,
    ds: &LabeledDataset,
    seed: u64,
    tally: &mut EfficiencyTally,
) -> Result<SeedOutcome> {
    let data = split(ds, cfg, seed)?;
    let setup = fit_horizontal(&data.train, cfg, seed)?;
    let model = &setup.fit.model;
    let parties = &setup.fit.parties;

    let party_accuracies = parties
        .iter()
        .map(|p| accuracy(model, p, &data.test))
        .collect::<dcshap_core::Result<Vec<f64>>>()?;
    let samples = leading_rows(&data.test, cfg.n_explain);
    let shared = anchor_reference(&setup.anchor, cfg.dc.reference)?;

    let mut attributions = Vec::new();
    for method in [Method::KernelShap, Method::DcShap] {
        let mut per_party = Vec::with_capacity(parties.len());
        for p in parties {
            let reference = match method {
                Method::KernelShap => own_data_reference(&p.share.features, cfg.dc.reference)?,
                Method::DcShap => shared.clone(),
            };
            let mut rows = Vec::with_capacity(samples.len());
            for x in samples.features.iter_rows() {
                let a = explain_party(p, model, x, &reference, AttributionRole::Horizontal)?;
                tally.record(&a);
                rows.push(a);
            }
            per_party.push(rows);
        }
        attributions.push((method, per_party));
    }
    let kernelshap_feature_rmse = pairwise_feature_rmse(&attributions[0].1)?;
    let dcshap_feature_rmse = pairwise_feature_rmse(&attributions[1].1)?;
    Ok(SeedOutcome {
        seed,
        party_sizes: parties.iter().map(|p| p.share.rows()).collect(),
        accuracy: mean(&party_accuracies),
        party_accuracies,
        kernelshap_rmse: mean(&kernelshap_feature_rmse),
        dcshap_rmse: mean(&dcshap_feature_rmse),
        kernelshap_feature_rmse,
        dcshap_feature_rmse,
        integration_residuals: setup.fit.residuals.clone(),
        attributions,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<ConsistencyReport> {
    cfg.validate(ExperimentKind::HorizontalConsistency)?;
    let ds = load_dataset(cfg)?;
    let mut efficiency = EfficiencyTally::default();
    let per_seed = cfg
        .seeds
        .iter()
        .map(|&s| run_seed(cfg, &ds, s, &mut efficiency))
        .collect::<Result<Vec<_>>>()?;
    let n_features = ds.n_features();
    let column = |f: &dyn Fn(&SeedOutcome) -> f64| MeanStd::of(&per_seed.iter().map(f).collect::<Vec<_>>());
    let feature_stats = |pick: fn(&SeedOutcome) -> &Vec<f64>| {
        (0..n_features)
            .map(|j| MeanStd::of(&per_seed.iter().map(|o| pick(o)[j]).collect::<Vec<_>>()))
            .collect()
    };
    Ok(ConsistencyReport {
        dataset: cfg.dataset.clone(),
        n_features,
        feature_names: ds.features.feature_names().to_vec(),
        seeds: cfg.seeds.clone(),
        n_explain: cfg.n_explain,
        dc_accuracy: column(&|o| o.accuracy),
        kernelshap_rmse: column(&|o| o.kernelshap_rmse),
        dcshap_rmse: column(&|o| o.dcshap_rmse),
        kernelshap_feature_rmse: feature_stats(|o| &o.kernelshap_feature_rmse),
        dcshap_feature_rmse: feature_stats(|o| &o.dcshap_feature_rmse),
        efficiency,
        per_seed,
    })
}

pub fn emit(report: &ConsistencyReport, out: &mut Emitter) -> Result<()> {
    let stem = format!("horizontal_{}_{}", report.dataset, seed_tag(&report.seeds));
    out.csv(&format!("{stem}_table.csv"), &TABLE_HEADER, &[report.table_row()])?;

    let rows: Vec<Vec<String>> = report
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (k, d) = (&report.kernelshap_feature_rmse[j], &report.dcshap_feature_rmse[j]);
            vec![name.clone(), num(k.mean), opt_num(k.std), num(d.mean), opt_num(d.std)]
        })
        .collect();
    out.csv(
        &format!("{stem}_feature_rmse.csv"),
        &[
            "feature",
            "kernelshap_rmse_mean",
            "kernelshap_rmse_std",
            "dcshap_rmse_mean",
            "dcshap_rmse_std",
        ],
        &rows,
    )?;
    out.json(&format!("{stem}_report.json"), report)?;

    for o in &report.per_seed {
        for (method, per_party) in &o.attributions {
            let name = format!(
                "horizontal_{}_seed{}_{}_attributions.json",
                report.dataset,
                o.seed,
                method.slug()
            );
            out.json(&name, per_party)?;
        }
    }

    let chart = svg::paired_bars(
        &format!("Per-feature RMSE between users: {}", report.dataset),
        &report.feature_names,
        (
            "KernelSHAP",
            &report
                .kernelshap_feature_rmse
                .iter()
                .map(|m| m.mean)
                .collect::<Vec<_>>(),
        ),
        (
            "DC-SHAP",
            &report.dcshap_feature_rmse.iter().map(|m| m.mean).collect::<Vec<_>>(),
        ),
    );
    out.text(&format!("{stem}_feature_rmse.svg"), &chart)?;
    Ok(())
}
