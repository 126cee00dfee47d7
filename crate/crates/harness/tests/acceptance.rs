//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use dcshap_core::dataset::{partition, FeatureBlock};
use dcshap_core::dc::{train_collab_vertical, SharedModel, VerticalParams};
use dcshap_core::protocol::{
    explain_vertical_full, explain_vertical_partial, MessageLog, Participant, ReferenceOrigin, ReferenceValue,
    VerticalExplainContext, VerticalRole,
};
use dcshap_core::shap::oracle::{brute_force_shapley, shapley_of_game};
use dcshap_core::shap::{explain, shapley_kernel_weight, ExplanationRequest, RowWeight};
use dcshap_core::{CollaborationModel, DataMatrix, LabeledDataset, PartitionSpec, PartyState};
use dcshap_harness::config::{ExperimentConfig, ExperimentKind, ADULT};
use dcshap_harness::experiments::{contradiction, horizontal, vertical, EfficiencyTally};
use dcshap_harness::run_experiment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DATASETS: [(&str, f64); 5] = [
    ("iris", 0.95),
    ("pima", 0.73),
    (ADULT, 0.83),
    ("wine", 0.94),
    ("heart", 0.80),
];

struct Gate {
    failed: Vec<u8>,
}

impl Gate {
    fn report(&mut self, id: u8, name: &str, pass: bool, detail: impl AsRef<str>) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{id}] {name}: {}", detail.as_ref());
        if !pass {
            self.failed.push(id);
        }
    }
}

fn manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/manifest.json")
}

fn config(kind: ExperimentKind, dataset: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(kind, dataset);
    cfg.manifest = manifest();
    cfg
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random smooth-plus-kinked model over `m` inputs.
fn random_model(rng: &mut ChaCha8Rng, m: usize) -> impl Fn(&DataMatrix) -> dcshap_core::Result<Vec<f64>> {
    let lin: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let pairs: Vec<(usize, usize, f64)> = (0..m)
        .map(|_| (rng.gen_range(0..m), rng.gen_range(0..m), rng.gen_range(-1.0..1.0)))
        .collect();
    let (c, e, h) = (
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    move |batch: &DataMatrix| {
        Ok(batch
            .iter_rows()
            .map(|z| {
                let mut v = c + e * z.iter().sum::<f64>().sin() + h * z[0].abs().max(z[m - 1]);
                v += lin.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
                v += pairs.iter().map(|&(i, j, w)| w * z[i] * z[j]).sum::<f64>();
                v
            })
            .collect())
    }
}

fn oracle_equivalence(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let m = 1 + i % 8;
        let model = random_model(&mut rng, m);
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let r: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let req = ExplanationRequest::new(&x, &r, &model).unwrap();
        let fast = explain(&req).unwrap();
        let slow = brute_force_shapley(&req).unwrap();
        worst = worst.max(max_abs_diff(&fast.phi, &slow.phi));
    }
    gate.report(
        1,
        "regression matches coalition enumeration",
        worst <= 1e-6,
        format!("200 instances, M 1..=8, max abs error {worst:.3e} (tol 1e-6)"),
    );
}

fn kernel_weights(gate: &mut Gate) {
    let w = |m, s| shapley_kernel_weight(m, s).unwrap();
    let exact = w(4, 1) == RowWeight::Kernel(0.25) && w(4, 2) == RowWeight::Kernel(0.125);
    let symmetric = (1..=12).all(|m| (0..=m).all(|s| w(m, s) == w(m, m - s)));
    gate.report(
        3,
        "kernel weight table",
        exact && symmetric,
        format!(
            "w(4,1)={:?} w(4,2)={:?}, symmetric for M<=12: {symmetric}",
            w(4, 1),
            w(4, 2)
        ),
    );
}

fn horizontal_tables(gate: &mut Gate, tally: &mut EfficiencyTally) {
    let mut reports = BTreeMap::new();
    for (name, _) in DATASETS {
        let started = Instant::now();
        let report = horizontal::run(&config(ExperimentKind::HorizontalConsistency, name)).unwrap();
        println!(
            "  {name}: accuracy {:.4}, KernelSHAP RMSE {:.4}, DC-SHAP RMSE {:.4}, factor {:.2} ({:.0?})",
            report.dc_accuracy.mean,
            report.kernelshap_rmse.mean,
            report.dcshap_rmse.mean,
            report.improvement_factor(),
            started.elapsed()
        );
        tally.merge(report.efficiency);
        reports.insert(name, report);
    }

    let all_lower = reports.values().all(|r| r.dcshap_rmse.mean < r.kernelshap_rmse.mean);
    let strong: Vec<&str> = DATASETS
        .iter()
        .map(|(n, _)| *n)
        .filter(|n| reports[n].improvement_factor() >= 1.75)
        .collect();
    gate.report(
        4,
        "horizontal consistency direction",
        all_lower && strong.len() >= 4,
        format!(
            "DC-SHAP < KernelSHAP on all five: {all_lower}; factor >= 1.75 on {}/5 ({})",
            strong.len(),
            strong.join(", ")
        ),
    );

    let iris = reports["iris"].dcshap_rmse.mean;
    let pima = reports["pima"].dcshap_rmse.mean;
    let off: Vec<String> = DATASETS
        .iter()
        .filter(|(n, want)| (reports[n].dc_accuracy.mean - want).abs() > 0.07)
        .map(|(n, want)| format!("{n} {:.3} vs {want}", reports[n].dc_accuracy.mean))
        .collect();
    gate.report(
        5,
        "horizontal consistency magnitudes",
        iris <= 0.15 && pima <= 0.03 && off.is_empty(),
        format!(
            "iris DC-SHAP RMSE {iris:.4} (<= 0.15), pima {pima:.4} (<= 0.03), accuracies off by > 0.07: [{}]",
            off.join("; ")
        ),
    );
}

fn contradiction_demo(gate: &mut Gate, tally: &mut EfficiencyTally) {
    let outcomes = contradiction::run(&config(ExperimentKind::DemoContradiction, ADULT)).unwrap();
    let ks: usize = outcomes.iter().map(|o| o.kernelshap_contradictions).sum();
    let dc: usize = outcomes.iter().map(|o| o.dcshap_contradictions).sum();
    for o in &outcomes {
        tally.merge(o.efficiency);
    }
    gate.report(
        6,
        "sign contradictions under the biased split",
        dc < ks,
        format!("KernelSHAP {ks} contradictory (feature, sample) pairs, DC-SHAP {dc}"),
    );
}

fn toy_vertical(host: usize, guest: usize, seed: u64) -> (LabeledDataset, CollaborationModel, Vec<PartyState>) {
    let n = host + guest;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..120 * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let labels = values
        .chunks(n)
        .map(|r| usize::from(r.iter().enumerate().map(|(j, v)| v * (j as f64 - 0.6)).sum::<f64>() > 0.0))
        .collect();
    let data = LabeledDataset::new(
        DataMatrix::from_values(120, n, values).unwrap(),
        labels,
        vec!["0".into(), "1".into()],
    )
    .unwrap();
    let spec = PartitionSpec::vertical(vec![FeatureBlock(0, host - 1), FeatureBlock(host, n - 1)]);
    let shares = partition(&data, &spec, 0).unwrap();
    let params = VerticalParams {
        local_dims: vec![host.min(2), guest.min(2)],
        k: 5,
        positive_class: 1,
    };
    let (model, states) = train_collab_vertical(&shares, &params).unwrap();
    (data, model, states)
}

fn vertical_predict(model: &CollaborationModel, states: &[PartyState], z: &[f64]) -> f64 {
    let reps: Vec<DataMatrix> = states
        .iter()
        .map(|s| {
            let cols = s.share.columns.clone();
            s.represent(&DataMatrix::from_values(1, cols.len(), z[cols].to_vec()).unwrap())
                .unwrap()
        })
        .collect();
    let refs: Vec<&DataMatrix> = reps.iter().collect();
    model.predict_proba(&DataMatrix::hstack(&refs).unwrap()).unwrap()[0]
}

/// Worst oracle error of the full and partial protocols, and worst dummy
/// attribution, over every 2-4 feature split.
fn vertical_toys() -> (f64, f64, f64) {
    let (mut full_err, mut partial_err, mut dummy): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let splits = [(1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (3, 1)];
    for (seed, (h, g)) in splits.into_iter().enumerate() {
        let (data, model, states) = toy_vertical(h, g, seed as u64);
        let r = data.features.column_medians();
        let reference = ReferenceValue {
            values: r.clone(),
            origin: ReferenceOrigin::Supplied,
        };
        let mut log = MessageLog::default();
        for x in data.features.iter_rows().take(8) {
            let got = explain_vertical_full(&states, &model, x, &reference, &mut log).unwrap();
            let oracle = |b: &DataMatrix| Ok(b.iter_rows().map(|z| vertical_predict(&model, &states, z)).collect());
            let want = brute_force_shapley(&ExplanationRequest::new(x, &r, &oracle).unwrap()).unwrap();
            full_err = full_err.max(max_abs_diff(&got.phi, &want.phi));

            for role in [VerticalRole::Host, VerticalRole::Guest] {
                let (lc, rc) = match role {
                    VerticalRole::Host => (0..h, h..h + g),
                    VerticalRole::Guest => (h..h + g, 0..h),
                };
                let ctx =
                    VerticalExplainContext::negotiate(&states, role, &x[rc.clone()], &r[rc.clone()], &mut log).unwrap();
                let got = explain_vertical_partial(&ctx, &model, &x[lc.clone()], &r[lc.clone()], &mut log).unwrap();
                let m = lc.len() + 1;
                let game: Vec<f64> = (0..1usize << m)
                    .map(|s| {
                        let mut z = r.clone();
                        for (i, j) in lc.clone().enumerate() {
                            if s & (1 << i) != 0 {
                                z[j] = x[j];
                            }
                        }
                        if s & (1 << (m - 1)) != 0 {
                            z[rc.clone()].copy_from_slice(&x[rc.clone()]);
                        }
                        vertical_predict(&model, &states, &z)
                    })
                    .collect();
                partial_err = partial_err.max(max_abs_diff(&got.phi, &shapley_of_game(m, &game)));

                // Local slice at the reference, then remote slice at the reference.
                let a = explain_vertical_partial(&ctx, &model, &r[lc.clone()], &r[lc.clone()], &mut log).unwrap();
                dummy = dummy.max(a.phi[..m - 1].iter().fold(0.0, |w, p| w.max(p.abs())));
                let ctx = VerticalExplainContext::negotiate(&states, role, &r[rc.clone()], &r[rc], &mut log).unwrap();
                let a = explain_vertical_partial(&ctx, &model, &x[lc.clone()], &r[lc], &mut log).unwrap();
                dummy = dummy.max(a.phi[m - 1].abs());
            }
        }
        let at_r = explain_vertical_full(&states, &model, &r, &reference, &mut log).unwrap();
        dummy = dummy.max(at_r.phi.iter().fold(0.0, |w, p| w.max(p.abs())));
    }
    (full_err, partial_err, dummy)
}

fn vertical_protocols(gate: &mut Gate, tally: &mut EfficiencyTally) {
    let (full_err, partial_err, dummy) = vertical_toys();
    let cfg = config(ExperimentKind::VerticalConsistency, ADULT);
    let outcomes = vertical::run(&cfg).unwrap();
    let widths: Vec<usize> = cfg
        .partition
        .feature_split
        .iter()
        .flatten()
        .map(|b| b.range().len())
        .collect();
    let private = outcomes.iter().all(|o| {
        let (host, guest) = (Participant::Party(0), Participant::Party(1));
        o.privacy_preserved && !o.log.leaks_width(guest, host, widths[1]) && !o.log.leaks_width(host, guest, widths[0])
    });
    for o in &outcomes {
        tally.merge(o.efficiency);
    }
    gate.report(
        7,
        "vertical protocols",
        full_err <= 1e-6 && partial_err <= 1e-6 && private && dummy <= 1e-9,
        format!(
            "full oracle error {full_err:.3e}, partial oracle error {partial_err:.3e} (tol 1e-6); \
             Adult privacy invariant held on {} run(s): {private}; worst dummy attribution {dummy:.3e} (tol 1e-9)",
            outcomes.len()
        ),
    );
}

fn efficiency(gate: &mut Gate, tally: EfficiencyTally) {
    gate.report(
        2,
        "efficiency over all harness explanations",
        tally.explanations >= 1000 && tally.max_gap <= 1e-6,
        format!(
            "{} explanations, max gap {:.3e} (tol 1e-6)",
            tally.explanations, tally.max_gap
        ),
    );
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            )
        })
        .collect()
}

fn determinism(gate: &mut Gate) {
    let mut reduced = Vec::new();
    let mut h = config(ExperimentKind::HorizontalConsistency, "iris");
    h.seeds = vec![0, 1];
    h.n_explain = 10;
    reduced.push((ExperimentKind::HorizontalConsistency, h));
    let mut c = config(ExperimentKind::DemoContradiction, ADULT);
    c.n_explain = 5;
    reduced.push((ExperimentKind::DemoContradiction, c));
    let mut v = config(ExperimentKind::VerticalConsistency, ADULT);
    v.n_explain = 5;
    reduced.push((ExperimentKind::VerticalConsistency, v));

    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (kind, mut cfg) in reduced {
        let mut trees = Vec::new();
        for run in 0..2 {
            cfg.output_dir = tmp.path().join(format!("{}-{run}", kind.slug()));
            run_experiment(kind, &cfg).unwrap();
            trees.push(read_tree(&cfg.output_dir));
        }
        files += trees[0].len();
        if trees[0] != trees[1] {
            mismatched.push(kind.slug());
        }
    }
    gate.report(
        8,
        "byte-identical reruns",
        mismatched.is_empty() && files > 0,
        format!(
            "{files} files per run compared across three commands; mismatched: [{}]",
            mismatched.join(", ")
        ),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: Vec::new() };
    let mut tally = EfficiencyTally::default();
    oracle_equivalence(&mut gate);
    kernel_weights(&mut gate);
    horizontal_tables(&mut gate, &mut tally);
    contradiction_demo(&mut gate, &mut tally);
    vertical_protocols(&mut gate, &mut tally);
    efficiency(&mut gate, tally);
    determinism(&mut gate);
    if gate.failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {:?}", gate.failed);
        ExitCode::FAILURE
    }
}
