use dcshap_core::dataset::FeatureBlock;
use dcshap_core::dataset::{partition, PartyShare};
use dcshap_core::dc::{
    accuracy, fit_integration, fit_local_transform, generate_anchor, pooled_feature_ranges, train_collab_horizontal,
    train_collab_vertical, CollaborationModel, HorizontalParams, IntegrationForm, SharedModel, TargetScaling,
    VerticalParams,
};
use dcshap_core::knn::SearchStrategy;
use dcshap_core::{DataMatrix, LabeledDataset, PartitionSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two noisy Gaussian-ish blobs in `cols` dimensions with uneven scales.
fn blobs(rows: usize, cols: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(rows * cols);
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let label = i % 2;
        for j in 0..cols {
            let noise: f64 = (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum();
            let centre = if label == 1 { 1.5 } else { -0.5 };
            values.push((centre + noise) * (1.0 + j as f64));
        }
        labels.push(label);
    }
    let features = DataMatrix::from_values(rows, cols, values).unwrap();
    LabeledDataset::new(features, labels, vec!["neg".into(), "pos".into()]).unwrap()
}

/// Brute-force kNN majority vote on raw features, written independently of
/// the library's neighbour search.
fn centralized_knn(train: &LabeledDataset, test: &LabeledDataset, k: usize) -> Vec<usize> {
    test.features
        .iter_rows()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = train
                .features
                .iter_rows()
                .enumerate()
                .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = [0usize; 2];
            for &(_, i) in &d[..k] {
                votes[train.labels[i]] += 1;
            }
            usize::from(votes[1] > votes[0])
        })
        .collect()
}

fn params(dim: usize, scaling: TargetScaling, form: IntegrationForm) -> HorizontalParams {
    HorizontalParams {
        local_dim: dim,
        collab_dim: dim,
        k: 7,
        positive_class: 1,
        target_scaling: scaling,
        integration_form: form,
    }
}

fn split(ds: &LabeledDataset, n_train: usize) -> (LabeledDataset, LabeledDataset) {
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..ds.len()).collect();
    (ds.select_rows(&train), ds.select_rows(&test))
}

#[test]
fn one_party_full_capacity_matches_centralized_knn() {
    let ds = blobs(300, 4, 11);
    let (train, test) = split(&ds, 200);
    let expected = centralized_knn(&train, &test, 7);
    let share = PartyShare::from_labeled(train.clone());
    let anchor = generate_anchor(&pooled_feature_ranges(&[&share.features]).unwrap(), 2000, 5).unwrap();
    // Principal-coordinate targets keep the unified space an isometric copy
    // of the raw space; unit-norm targets rescale axes and are not covered.
    for form in [IntegrationForm::Affine, IntegrationForm::Linear] {
        let fit = train_collab_horizontal(
            std::slice::from_ref(&share),
            &anchor,
            &params(4, TargetScaling::SingularValues, form),
        )
        .unwrap();
        let unified = fit.parties[0].to_unified(&test.features).unwrap();
        assert_eq!(fit.model.predict_class(&unified).unwrap(), expected, "{form:?}");
        let hits = expected.iter().zip(&test.labels).filter(|(a, b)| a == b).count();
        let acc = accuracy(&fit.model, &fit.parties[0], &test).unwrap();
        assert_eq!(acc, hits as f64 / test.len() as f64);
    }
}

#[test]
fn affine_full_capacity_parties_compose_identically() {
    let ds = blobs(400, 5, 3);
    let shares = partition(&ds, &PartitionSpec::horizontal(2), 1).unwrap();
    let views: Vec<&DataMatrix> = shares.iter().map(|s| &s.features).collect();
    let anchor = generate_anchor(&pooled_feature_ranges(&views).unwrap(), 2000, 2).unwrap();
    let probe = blobs(50, 5, 99).features;
    let gap = |form| {
        let fit = train_collab_horizontal(&shares, &anchor, &params(5, TargetScaling::Orthonormal, form)).unwrap();
        let a = fit.parties[0].to_unified(&probe).unwrap();
        let b = fit.parties[1].to_unified(&probe).unwrap();
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    assert!(gap(IntegrationForm::Affine) < 1e-9);
    // Without an intercept, the party-specific centering shift leaks through.
    assert!(gap(IntegrationForm::Linear) > 1e-6);
}

#[test]
fn integration_disagreement_is_bounded_by_residuals() {
    let ds = blobs(400, 6, 21);
    let shares = partition(&ds, &PartitionSpec::horizontal(3), 4).unwrap();
    let views: Vec<&DataMatrix> = shares.iter().map(|s| &s.features).collect();
    let anchor = generate_anchor(&pooled_feature_ranges(&views).unwrap(), 500, 8).unwrap();
    let transforms: Vec<_> = shares
        .iter()
        .map(|s| fit_local_transform(&s.features, 4).unwrap())
        .collect();
    let reps: Vec<DataMatrix> = transforms.iter().map(|t| t.apply(&anchor.data).unwrap()).collect();
    for form in [IntegrationForm::Affine, IntegrationForm::Linear] {
        let fit = fit_integration(&reps, 4, TargetScaling::Orthonormal, form).unwrap();
        let unified: Vec<DataMatrix> = fit.maps.iter().zip(&reps).map(|(g, r)| g.apply(r).unwrap()).collect();
        for i in 0..unified.len() {
            for j in i + 1..unified.len() {
                let diff: f64 = unified[i]
                    .values()
                    .iter()
                    .zip(unified[j].values())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(diff <= fit.residuals[i] + fit.residuals[j] + 1e-9);
            }
        }
        assert!(fit.target.norm() > 0.0);
    }
}

#[test]
fn reduced_transform_has_a_null_space() {
    let x = blobs(100, 6, 5).features;
    let t = fit_local_transform(&x, 4).unwrap();
    assert_eq!(t.projection.shape(), (6, 4));
    // Any vector orthogonal to the projection's columns maps to zero, so two
    // different inputs share one representation.
    let p = &t.projection;
    let complement = nalgebra::DMatrix::<f64>::identity(6, 6) - p * p.transpose();
    let v = complement
        .column_iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    assert!(v.norm() > 0.5);
    let shifted: Vec<f64> = x.row(0).iter().zip(v.iter()).map(|(a, b)| a + b).collect();
    let pair = DataMatrix::from_values(2, 6, [x.row(0), &shifted[..]].concat()).unwrap();
    let rep = t.apply(&pair).unwrap();
    for j in 0..4 {
        assert!((rep.get(0, j) - rep.get(1, j)).abs() < 1e-10);
    }
}

#[test]
fn horizontal_pipeline_is_deterministic() {
    let ds = blobs(300, 5, 8);
    let run = || {
        let shares = partition(&ds, &PartitionSpec::horizontal(2), 3).unwrap();
        let views: Vec<&DataMatrix> = shares.iter().map(|s| &s.features).collect();
        let anchor = generate_anchor(&pooled_feature_ranges(&views).unwrap(), 300, 3).unwrap();
        let fit = train_collab_horizontal(
            &shares,
            &anchor,
            &params(4, TargetScaling::Orthonormal, IntegrationForm::Affine),
        )
        .unwrap();
        (anchor, fit.model, fit.parties)
    };
    let (a1, m1, p1) = run();
    let (a2, m2, p2) = run();
    assert_eq!(a1.data.values(), a2.data.values());
    assert_eq!(m1, m2);
    assert_eq!(p1, p2);
}

#[test]
fn single_vertical_party_is_the_unintegrated_pipeline() {
    let ds = blobs(200, 4, 13);
    let shares = partition(&ds, &PartitionSpec::vertical(vec![FeatureBlock(0, 3)]), 0).unwrap();
    let (model, states) = train_collab_vertical(
        &shares,
        &VerticalParams {
            local_dims: vec![3],
            k: 7,
            positive_class: 1,
        },
    )
    .unwrap();
    let t = fit_local_transform(&ds.features, 3).unwrap();
    assert_eq!(states[0].transform, t);
    assert!(states[0].integration.is_none());
    assert_eq!(model.training_points(), &t.apply(&ds.features).unwrap());
}

#[test]
fn vertical_row_mismatch_is_rejected() {
    let ds = blobs(60, 4, 1);
    let mut shares = partition(
        &ds,
        &PartitionSpec::vertical(vec![FeatureBlock(0, 1), FeatureBlock(2, 3)]),
        0,
    )
    .unwrap();
    let keep: Vec<usize> = (0..59).collect();
    shares[1].features = shares[1].features.select_rows(&keep);
    let err = train_collab_vertical(
        &shares,
        &VerticalParams {
            local_dims: vec![1, 1],
            k: 3,
            positive_class: 1,
        },
    )
    .unwrap_err();
    assert!(err.to_string().contains("rows"), "{err}");
}

#[test]
fn knn_search_strategies_agree_on_pipeline_output() {
    let ds = blobs(500, 5, 17);
    let shares = partition(&ds, &PartitionSpec::horizontal(2), 0).unwrap();
    let views: Vec<&DataMatrix> = shares.iter().map(|s| &s.features).collect();
    let anchor = generate_anchor(&pooled_feature_ranges(&views).unwrap(), 400, 1).unwrap();
    let fit = train_collab_horizontal(
        &shares,
        &anchor,
        &params(3, TargetScaling::Orthonormal, IntegrationForm::Affine),
    )
    .unwrap();
    let brute = fit.model.clone().with_strategy(SearchStrategy::BruteForce);
    let queries = fit.parties[1].to_unified(&blobs(200, 5, 4).features).unwrap();
    assert_eq!(
        fit.model.predict_proba(&queries).unwrap(),
        brute.predict_proba(&queries).unwrap()
    );
}

/// Signed coordinate permutations are exact in floating point, so kNN
/// output must not move at all.
fn signed_permutation() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    (
        Just((0..4).collect::<Vec<usize>>()).prop_shuffle(),
        prop::collection::vec(prop::bool::ANY, 4),
    )
        .prop_map(|(perm, flips)| (perm, flips.into_iter().map(|f| if f { -1.0 } else { 1.0 }).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn knn_probability_is_isometry_invariant(seed in 0u64..1000, (perm, signs) in signed_permutation()) {
        let train = blobs(120, 4, seed);
        let queries = blobs(30, 4, seed + 1).features;
        let apply = |m: &DataMatrix| {
            let values = m
                .iter_rows()
                .flat_map(|r| perm.iter().zip(&signs).map(|(&p, s)| s * r[p]).collect::<Vec<_>>())
                .collect();
            DataMatrix::from_values(m.rows(), 4, values).unwrap()
        };
        let plain = CollaborationModel::fit(train.features.clone(), train.labels.clone(), 2, 7, 1).unwrap();
        let moved = CollaborationModel::fit(apply(&train.features), train.labels.clone(), 2, 7, 1).unwrap();
        prop_assert_eq!(plain.predict_proba(&queries).unwrap(), moved.predict_proba(&apply(&queries)).unwrap());
    }
}

#[test]
fn knn_probability_survives_a_generic_rotation() {
    let train = blobs(150, 3, 2);
    let queries = blobs(40, 3, 3).features;
    let (c, s) = (0.6f64, 0.8f64);
    let rot = |m: &DataMatrix| {
        let values = m
            .iter_rows()
            .flat_map(|r| [c * r[0] - s * r[1] + 10.0, s * r[0] + c * r[1] - 3.0, r[2] + 0.5])
            .collect();
        DataMatrix::from_values(m.rows(), 3, values).unwrap()
    };
    let plain = CollaborationModel::fit(train.features.clone(), train.labels.clone(), 2, 7, 1).unwrap();
    let moved = CollaborationModel::fit(rot(&train.features), train.labels.clone(), 2, 7, 1).unwrap();
    assert_eq!(
        plain.predict_proba(&queries).unwrap(),
        moved.predict_proba(&rot(&queries)).unwrap()
    );
}
