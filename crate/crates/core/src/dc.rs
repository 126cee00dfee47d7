//! Data Collaboration training: shared anchor data, private dimensionality
//! reductions, integration into a common space, and the shared kNN model.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{rng, LabeledDataset, PartyShare};
use crate::error::{check_dim, Error, Result};
use crate::knn::{NeighborIndex, SearchStrategy};
use crate::linalg::{fix_column_signs, is_orthonormal, pseudo_inverse, SortedSvd};
use crate::matrix::{default_names, nested, DataMatrix};

/// Synthetic rows shared verbatim by every party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub data: DataMatrix,
}

impl AnchorSet {
    pub fn rows(&self) -> usize {
        self.data.rows()
    }
}

/// Element-wise min/max pooled over every party's share.
pub fn pooled_feature_ranges(shares: &[&DataMatrix]) -> Result<Vec<(f64, f64)>> {
    let first = shares
        .first()
        .ok_or_else(|| Error::invalid("no party data to pool ranges from"))?;
    let mut ranges = first.column_ranges();
    for s in &shares[1..] {
        check_dim("pooled ranges width", ranges.len(), s.cols())?;
        for (r, (lo, hi)) in ranges.iter_mut().zip(s.column_ranges()) {
            r.0 = r.0.min(lo);
            r.1 = r.1.max(hi);
        }
    }
    Ok(ranges)
}

/// Draws each anchor cell uniformly from its feature's `[min, max]`.
pub fn generate_anchor(feature_ranges: &[(f64, f64)], m_anc: usize, seed: u64) -> Result<AnchorSet> {
    if m_anc == 0 {
        return Err(Error::invalid("anchor size must be at least 1"));
    }
    for (j, &(lo, hi)) in feature_ranges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::invalid(format!(
                "feature {j}: inverted or non-finite range ({lo}, {hi})"
            )));
        }
    }
    let mut rng = rng(seed);
    let cols = feature_ranges.len();
    let mut values = Vec::with_capacity(m_anc * cols);
    for _ in 0..m_anc {
        for &(lo, hi) in feature_ranges {
            let v = lo + (hi - lo) * rng.gen::<f64>();
            values.push(v.clamp(lo, hi));
        }
    }
    Ok(AnchorSet {
        data: DataMatrix::from_values(m_anc, cols, values)?,
    })
}

/// Private linear map `x -> (x - centering) * projection`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTransform {
    #[serde(with = "nested")]
    pub projection: DMatrix<f64>,
    pub centering: Vec<f64>,
}

impl LocalTransform {
    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// `P^T P = I` within `tol`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        is_orthonormal(&self.projection, tol)
    }

    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        check_dim("transform input width", self.input_dim(), x.cols())?;
        let d = self.output_dim();
        let mut out = Vec::with_capacity(x.rows() * d);
        let mut centered = vec![0.0; self.input_dim()];
        for row in x.iter_rows() {
            for ((c, v), m) in centered.iter_mut().zip(row).zip(&self.centering) {
                *c = v - m;
            }
            for k in 0..d {
                let col = self.projection.column(k);
                out.push(centered.iter().zip(col.iter()).map(|(a, b)| a * b).sum());
            }
        }
        DataMatrix::new(x.rows(), d, out, default_names("f", d))
    }
}

/// Column-mean centering followed by projection on the top `target_dim`
/// right singular vectors of the centered data.
pub fn fit_local_transform(x: &DataMatrix, target_dim: usize) -> Result<LocalTransform> {
    let limit = x.rows().min(x.cols());
    if target_dim == 0 || target_dim > limit {
        return Err(Error::invalid(format!(
            "target dimension {target_dim} outside 1..={limit}"
        )));
    }
    let centering = x.column_means();
    let mut m = x.to_dmatrix();
    for mut row in m.row_iter_mut() {
        for (v, c) in row.iter_mut().zip(&centering) {
            *v -= c;
        }
    }
    let svd = SortedSvd::new(&m, false)?;
    let rank = svd.rank(m.shape());
    if rank < target_dim {
        return Err(Error::RankDeficient {
            requested: target_dim,
            achievable: rank,
        });
    }
    let mut projection = svd.v.columns(0, target_dim).into_owned();
    fix_column_signs(&mut projection);
    Ok(LocalTransform { projection, centering })
}

pub fn apply_transform(t: &LocalTransform, x: &DataMatrix) -> Result<DataMatrix> {
    t.apply(x)
}

/// Per-party map `rep -> rep * matrix + offset` into the collaboration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationMap {
    #[serde(with = "nested")]
    pub matrix: DMatrix<f64>,
    /// All zeros for linear maps.
    pub offset: Vec<f64>,
}

impl IntegrationMap {
    pub fn apply(&self, rep: &DataMatrix) -> Result<DataMatrix> {
        check_dim("integration input width", self.matrix.nrows(), rep.cols())?;
        let mut out = rep.to_dmatrix() * &self.matrix;
        for mut row in out.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(&self.offset) {
                *v += b;
            }
        }
        DataMatrix::from_dmatrix(&out, default_names("z", self.matrix.ncols()))
    }
}

/// Shape of the integration maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationForm {
    /// `G_i` has an intercept and `Z` is built from column-centered anchor
    /// representations. Each party centers on its own mean, so its anchor
    /// representation carries a party-specific shift that only an
    /// intercept can cancel.
    #[default]
    Affine,
    /// `G_i` is a plain matrix fitted to uncentered representations.
    Linear,
}

/// How the common target `Z` is scaled from the left singular vectors of
/// the concatenated anchor representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetScaling {
    /// `Z = U_d`: each collaboration axis has unit norm over the anchor.
    #[default]
    Orthonormal,
    /// `Z = U_d * S_d`: principal coordinates of the concatenated anchor.
    SingularValues,
}

#[derive(Debug, Clone)]
pub struct IntegrationFit {
    pub maps: Vec<IntegrationMap>,
    /// Common target over the anchor rows.
    pub target: DMatrix<f64>,
    /// Frobenius norm of `rep_i * G_i - Z` per party.
    pub residuals: Vec<f64>,
}

pub fn fit_integration(
    anchor_reps: &[DataMatrix],
    target_dim: usize,
    scaling: TargetScaling,
    form: IntegrationForm,
) -> Result<IntegrationFit> {
    let first = anchor_reps
        .first()
        .ok_or_else(|| Error::invalid("no anchor representations"))?;
    for r in anchor_reps {
        check_dim("anchor representation rows", first.rows(), r.rows())?;
    }
    let total: usize = anchor_reps.iter().map(DataMatrix::cols).sum();
    if target_dim == 0 || target_dim > total.min(first.rows()) {
        return Err(Error::invalid(format!(
            "collaboration dimension {target_dim} outside 1..={}",
            total.min(first.rows())
        )));
    }
    let blocks: Vec<&DataMatrix> = anchor_reps.iter().collect();
    let mut joined = DataMatrix::hstack(&blocks)?.to_dmatrix();
    if form == IntegrationForm::Affine {
        for mut col in joined.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    let svd = SortedSvd::new(&joined, true)?;
    let rank = svd.rank(joined.shape());
    if rank < target_dim {
        return Err(Error::RankDeficient {
            requested: target_dim,
            achievable: rank,
        });
    }
    let mut target = svd.u.expect("requested U").columns(0, target_dim).into_owned();
    fix_column_signs(&mut target);
    if scaling == TargetScaling::SingularValues {
        for (k, mut col) in target.column_iter_mut().enumerate() {
            col *= svd.singular[k];
        }
    }
    let mut maps = Vec::with_capacity(anchor_reps.len());
    let mut residuals = Vec::with_capacity(anchor_reps.len());
    for rep in anchor_reps {
        let mut a = rep.to_dmatrix();
        let d = a.ncols();
        if form == IntegrationForm::Affine {
            a = a.insert_column(d, 1.0);
        }
        let g = pseudo_inverse(&a)? * &target;
        residuals.push((&a * &g - &target).norm());
        let offset = match form {
            IntegrationForm::Affine => g.row(d).iter().copied().collect(),
            IntegrationForm::Linear => vec![0.0; target_dim],
        };
        maps.push(IntegrationMap {
            matrix: g.rows(0, d).into_owned(),
            offset,
        });
    }
    Ok(IntegrationFit {
        maps,
        target,
        residuals,
    })
}

/// One collaborator's private holdings and fitted maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyState {
    pub party_id: usize,
    pub share: PartyShare,
    pub transform: LocalTransform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationMap>,
}

impl PartyState {
    pub fn n_features(&self) -> usize {
        self.share.features.cols()
    }

    /// Intermediate representation `F(x)`; the only data-derived artifact
    /// that leaves the party.
    pub fn represent(&self, x: &DataMatrix) -> Result<DataMatrix> {
        self.transform.apply(x)
    }

    /// `G(F(x))` for horizontal parties, `F(x)` otherwise.
    pub fn to_unified(&self, x: &DataMatrix) -> Result<DataMatrix> {
        let rep = self.transform.apply(x)?;
        match &self.integration {
            Some(g) => g.apply(&rep),
            None => Ok(rep),
        }
    }
}

/// Black-box classifier over the unified space.
pub trait SharedModel: Send + Sync {
    fn input_dim(&self) -> usize;
    /// Probability of the positive class for each row.
    fn predict_proba(&self, points: &DataMatrix) -> Result<Vec<f64>>;
    fn predict_class(&self, points: &DataMatrix) -> Result<Vec<usize>>;
}

/// Shared kNN classifier `h`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct CollaborationModel {
    k: usize,
    training_points: DataMatrix,
    training_labels: Vec<usize>,
    positive_class: usize,
    n_classes: usize,
    strategy: SearchStrategy,
    index: NeighborIndex,
}

impl PartialEq for CollaborationModel {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.training_points == other.training_points
            && self.training_labels == other.training_labels
            && self.positive_class == other.positive_class
            && self.n_classes == other.n_classes
    }
}

impl CollaborationModel {
    pub fn fit(
        training_points: DataMatrix,
        training_labels: Vec<usize>,
        n_classes: usize,
        k: usize,
        positive_class: usize,
    ) -> Result<Self> {
        check_dim("training labels", training_points.rows(), training_labels.len())?;
        if k == 0 || k > training_points.rows() {
            return Err(Error::invalid(format!(
                "k = {k} must lie in 1..={}",
                training_points.rows()
            )));
        }
        if positive_class >= n_classes || training_labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::invalid("class index outside 0..n_classes"));
        }
        if !training_points.is_finite() {
            return Err(Error::Numerical("non-finite training point".into()));
        }
        let index = NeighborIndex::new(&training_points);
        Ok(Self {
            k,
            training_points,
            training_labels,
            positive_class,
            n_classes,
            strategy: SearchStrategy::KdTree,
            index,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn positive_class(&self) -> usize {
        self.positive_class
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn training_points(&self) -> &DataMatrix {
        &self.training_points
    }

    pub fn training_labels(&self) -> &[usize] {
        &self.training_labels
    }

    pub fn with_strategy(mut self, strategy: SearchStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    fn votes(&self, q: &[f64]) -> Vec<usize> {
        let mut votes = vec![0; self.n_classes];
        for n in self.index.nearest(q, self.k, self.strategy) {
            votes[self.training_labels[n.index]] += 1;
        }
        votes
    }
}

impl SharedModel for CollaborationModel {
    fn input_dim(&self) -> usize {
        self.training_points.cols()
    }

    fn predict_proba(&self, points: &DataMatrix) -> Result<Vec<f64>> {
        check_dim("model input width", self.input_dim(), points.cols())?;
        Ok(points
            .iter_rows()
            .map(|q| self.votes(q)[self.positive_class] as f64 / self.k as f64)
            .collect())
    }

    /// Majority vote; ties go to the lowest class index.
    fn predict_class(&self, points: &DataMatrix) -> Result<Vec<usize>> {
        check_dim("model input width", self.input_dim(), points.cols())?;
        Ok(points
            .iter_rows()
            .map(|q| {
                let votes = self.votes(q);
                let top = *votes.iter().max().expect("at least two classes");
                votes.iter().position(|&v| v == top).expect("max exists")
            })
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    k: usize,
    positive_class: usize,
    n_classes: usize,
    training_labels: Vec<usize>,
    training_points: DataMatrix,
}

impl From<CollaborationModel> for ModelDoc {
    fn from(m: CollaborationModel) -> Self {
        ModelDoc {
            k: m.k,
            positive_class: m.positive_class,
            n_classes: m.n_classes,
            training_labels: m.training_labels,
            training_points: m.training_points,
        }
    }
}

impl TryFrom<ModelDoc> for CollaborationModel {
    type Error = Error;

    fn try_from(d: ModelDoc) -> Result<Self> {
        CollaborationModel::fit(d.training_points, d.training_labels, d.n_classes, d.k, d.positive_class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalParams {
    /// Intermediate dimension `d_i` used by every party.
    pub local_dim: usize,
    /// Collaboration dimension shared by all integration maps.
    pub collab_dim: usize,
    pub k: usize,
    pub positive_class: usize,
    #[serde(default)]
    pub target_scaling: TargetScaling,
    #[serde(default)]
    pub integration_form: IntegrationForm,
}

#[derive(Debug, Clone)]
pub struct HorizontalFit {
    pub model: CollaborationModel,
    pub parties: Vec<PartyState>,
    pub residuals: Vec<f64>,
}

pub fn train_collab_horizontal(
    shares: &[PartyShare],
    anchor: &AnchorSet,
    params: &HorizontalParams,
) -> Result<HorizontalFit> {
    let first = shares.first().ok_or_else(|| Error::invalid("no parties"))?;
    for s in shares {
        if s.features.feature_names() != first.features.feature_names() {
            return Err(Error::invalid("horizontal parties must share one feature schema"));
        }
        if s.labels.is_none() {
            return Err(Error::invalid("every horizontal party must hold labels"));
        }
    }
    check_dim("anchor width", first.features.cols(), anchor.data.cols())?;

    let transforms = shares
        .iter()
        .map(|s| fit_local_transform(&s.features, params.local_dim))
        .collect::<Result<Vec<_>>>()?;
    let anchor_reps = transforms
        .iter()
        .map(|t| t.apply(&anchor.data))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_integration(
        &anchor_reps,
        params.collab_dim,
        params.target_scaling,
        params.integration_form,
    )?;

    let mut parties = Vec::with_capacity(shares.len());
    let mut unified = Vec::with_capacity(shares.len());
    let mut labels = Vec::new();
    for (i, ((share, transform), map)) in shares.iter().zip(transforms).zip(fit.maps).enumerate() {
        let state = PartyState {
            party_id: i,
            share: share.clone(),
            transform,
            integration: Some(map),
        };
        unified.push(state.to_unified(&share.features)?);
        labels.extend_from_slice(share.labels.as_deref().expect("checked above"));
        parties.push(state);
    }
    let blocks: Vec<&DataMatrix> = unified.iter().collect();
    let points = DataMatrix::vstack(&blocks)?;
    let model = CollaborationModel::fit(points, labels, first.class_names.len(), params.k, params.positive_class)?;
    Ok(HorizontalFit {
        model,
        parties,
        residuals: fit.residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalParams {
    /// Intermediate dimension per party, in party order.
    pub local_dims: Vec<usize>,
    pub k: usize,
    pub positive_class: usize,
}

pub fn train_collab_vertical(
    shares: &[PartyShare],
    params: &VerticalParams,
) -> Result<(CollaborationModel, Vec<PartyState>)> {
    let first = shares.first().ok_or_else(|| Error::invalid("no parties"))?;
    check_dim("vertical local dims", shares.len(), params.local_dims.len())?;
    for s in shares {
        check_dim("vertical party rows", first.rows(), s.rows())?;
    }
    let holders: Vec<&PartyShare> = shares.iter().filter(|s| s.labels.is_some()).collect();
    let [holder] = holders.as_slice() else {
        return Err(Error::invalid(format!(
            "exactly one vertical party must hold labels, found {}",
            holders.len()
        )));
    };
    let labels = holder.labels.clone().expect("filtered");

    let mut parties = Vec::with_capacity(shares.len());
    let mut reps = Vec::with_capacity(shares.len());
    for (i, (share, &d)) in shares.iter().zip(&params.local_dims).enumerate() {
        let transform = fit_local_transform(&share.features, d)?;
        reps.push(transform.apply(&share.features)?);
        parties.push(PartyState {
            party_id: i,
            share: share.clone(),
            transform,
            integration: None,
        });
    }
    let blocks: Vec<&DataMatrix> = reps.iter().collect();
    let points = DataMatrix::hstack(&blocks)?;
    let model = CollaborationModel::fit(
        points,
        labels,
        holder.class_names.len(),
        params.k,
        params.positive_class,
    )?;
    Ok((model, parties))
}

/// Fraction of `test` rows whose predicted class (via `party`'s maps) matches.
pub fn accuracy(model: &dyn SharedModel, party: &PartyState, test: &LabeledDataset) -> Result<f64> {
    let unified = party.to_unified(&test.features)?;
    let predicted = model.predict_class(&unified)?;
    let hits = predicted.iter().zip(&test.labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / test.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let mut r = rng(seed);
        let values = (0..rows * cols).map(|_| r.gen_range(-3.0..3.0)).collect();
        DataMatrix::from_values(rows, cols, values).unwrap()
    }

    #[test]
    fn anchor_respects_ranges() {
        let a = generate_anchor(&[(0.0, 0.0), (-1.0, 2.0)], 500, 9).unwrap();
        assert!(a.data.column(0).iter().all(|&v| v == 0.0));
        assert!(a.data.column(1).iter().all(|&v| (-1.0..=2.0).contains(&v)));
        assert_eq!(a, generate_anchor(&[(0.0, 0.0), (-1.0, 2.0)], 500, 9).unwrap());
        assert!(generate_anchor(&[(1.0, 0.0)], 5, 0).is_err());
        assert!(generate_anchor(&[(0.0, 1.0)], 0, 0).is_err());
    }

    #[test]
    fn full_rank_transform_is_lossless() {
        let x = sample(40, 4, 1);
        let t = fit_local_transform(&x, 4).unwrap();
        assert!(t.is_orthonormal(1e-8));
        let rep = t.apply(&x).unwrap().to_dmatrix();
        let back = rep * t.projection.transpose();
        for i in 0..x.rows() {
            for j in 0..4 {
                assert!((back[(i, j)] + t.centering[j] - x.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reduced_transform_is_rectangular() {
        let x = sample(40, 5, 2);
        let t = fit_local_transform(&x, 3).unwrap();
        assert_eq!((t.input_dim(), t.output_dim()), (5, 3));
        assert!(t.is_orthonormal(1e-8));
    }

    #[test]
    fn centering_vector_maps_to_zero() {
        let x = sample(30, 3, 3);
        let t = fit_local_transform(&x, 2).unwrap();
        let c = DataMatrix::from_values(1, 3, t.centering.clone()).unwrap();
        assert!(t.apply(&c).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(t.apply(&sample(2, 4, 0)).is_err());
    }

    #[test]
    fn rank_deficiency_names_achievable_rank() {
        let mut x = sample(20, 3, 4);
        for i in 0..20 {
            let v = x.get(i, 0);
            x.row_mut(i)[2] = 2.0 * v;
        }
        match fit_local_transform(&x, 3).unwrap_err() {
            Error::RankDeficient { requested, achievable } => assert_eq!((requested, achievable), (3, 2)),
            e => panic!("{e}"),
        }
        assert!(fit_local_transform(&x, 0).is_err());
        assert!(fit_local_transform(&x, 4).is_err());
    }

    #[test]
    fn single_party_integration_is_exact() {
        let rep = sample(50, 3, 5);
        let fit = fit_integration(std::slice::from_ref(&rep), 3, TargetScaling::Orthonormal, IntegrationForm::Linear).unwrap();
        assert!(fit.residuals[0] <= 1e-8, "{:?}", fit.residuals);
        assert!(fit.maps[0].matrix.clone().try_inverse().is_some());
    }

    #[test]
    fn identical_parties_get_identical_maps() {
        let rep = sample(50, 3, 6);
        let fit = fit_integration(
            &[rep.clone(), rep],
            3,
            TargetScaling::Orthonormal,
            IntegrationForm::Linear,
        )
        .unwrap();
        assert_eq!(fit.maps[0], fit.maps[1]);
        assert!(fit_integration(
            &[sample(5, 2, 0), sample(6, 2, 0)],
            2,
            TargetScaling::Orthonormal,
            IntegrationForm::Linear
        )
        .is_err());
    }

    #[test]
    fn knn_probability_counts_positive_neighbours() {
        let pts = DataMatrix::from_values(7, 1, (0..7).map(f64::from).collect()).unwrap();
        let labels = vec![1, 1, 1, 1, 0, 0, 0];
        let m = CollaborationModel::fit(pts, labels, 2, 7, 1).unwrap();
        let q = DataMatrix::from_values(1, 1, vec![3.0]).unwrap();
        assert_eq!(m.predict_proba(&q).unwrap(), vec![4.0 / 7.0]);
        assert_eq!(m.predict_class(&q).unwrap(), vec![1]);
        assert!(m.predict_proba(&DataMatrix::zeros(1, 2)).is_err());
        let pts = DataMatrix::from_values(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(CollaborationModel::fit(pts, vec![0, 1], 2, 3, 1).is_err());
    }
}
