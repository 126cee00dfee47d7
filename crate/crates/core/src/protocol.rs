//! DC-SHAP protocols: horizontal explanations against an anchor-derived
//! reference, and the two vertical flows (third-party full view and
//! host/guest partial view with one aggregated indicator for the other side).
//!
//! Vertical runs record every simulated transfer in a [`MessageLog`] so the
//! privacy boundary can be audited after the fact.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dc::{AnchorSet, LocalTransform, PartyState, SharedModel};
use crate::error::{check_dim, Error, Result};
use crate::matrix::DataMatrix;
use crate::shap::{
    build_synthetic_inputs, enumerate_coalitions, explain, solve_attribution, Attribution, AttributionRole, BatchModel,
    ExplanationRequest,
};

/// Label used for the aggregated remote-party indicator.
pub const DC_FEATURES: &str = "DC Features";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceOrigin {
    AnchorMedian,
    AnchorMean,
    PartyData,
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub values: Vec<f64>,
    pub origin: ReferenceOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Median,
    Mean,
}

pub fn anchor_median_reference(anchor: &AnchorSet) -> Result<ReferenceValue> {
    anchor_reference(anchor, Aggregate::Median)
}

pub fn anchor_reference(anchor: &AnchorSet, aggregate: Aggregate) -> Result<ReferenceValue> {
    if anchor.rows() == 0 {
        return Err(Error::invalid("empty anchor"));
    }
    Ok(match aggregate {
        Aggregate::Median => ReferenceValue {
            values: anchor.data.column_medians(),
            origin: ReferenceOrigin::AnchorMedian,
        },
        Aggregate::Mean => ReferenceValue {
            values: anchor.data.column_means(),
            origin: ReferenceOrigin::AnchorMean,
        },
    })
}

/// Column medians of a party's own data.
pub fn party_median_reference(data: &DataMatrix) -> Result<ReferenceValue> {
    if data.rows() == 0 {
        return Err(Error::invalid("empty party data"));
    }
    Ok(ReferenceValue {
        values: data.column_medians(),
        origin: ReferenceOrigin::PartyData,
    })
}

/// `v -> h(G(F(v)))` for one party.
pub struct ComposedModel<'a> {
    pub party: &'a PartyState,
    pub model: &'a dyn SharedModel,
}

impl BatchModel for ComposedModel<'_> {
    fn evaluate(&self, batch: &DataMatrix) -> Result<Vec<f64>> {
        self.model.predict_proba(&self.party.to_unified(batch)?)
    }
}

/// KernelSHAP on a party's composed model with an arbitrary reference.
pub fn explain_party(
    party: &PartyState,
    model: &dyn SharedModel,
    x: &[f64],
    reference: &ReferenceValue,
    role: AttributionRole,
) -> Result<Attribution> {
    check_dim("explained instance width", party.n_features(), x.len())?;
    let composed = ComposedModel { party, model };
    let req = ExplanationRequest::new(x, &reference.values, &composed)?;
    let names = party.share.features.feature_names().to_vec();
    let values = x.iter().copied().map(Some).collect();
    Ok(explain(&req)?.with_features(names, values)?.with_role(role))
}

/// Horizontal DC-SHAP: reference is the shared anchor's median.
pub fn explain_horizontal(
    party: &PartyState,
    model: &dyn SharedModel,
    x: &[f64],
    anchor: &AnchorSet,
) -> Result<Attribution> {
    let r = anchor_median_reference(anchor)?;
    explain_party(party, model, x, &r, AttributionRole::Horizontal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "role", content = "id")]
pub enum Participant {
    ThirdParty,
    Analyst,
    Party(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadKind {
    ReferenceValues,
    SyntheticInputs,
    IntermediateRepresentation,
    UnifiedBatch,
    Predictions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub sender: Participant,
    pub receiver: Participant,
    pub kind: PayloadKind,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLog {
    pub entries: Vec<Message>,
}

impl MessageLog {
    pub fn record(&mut self, sender: Participant, receiver: Participant, kind: PayloadKind, rows: usize, cols: usize) {
        self.entries.push(Message {
            sender,
            receiver,
            kind,
            rows,
            cols,
        });
    }

    pub fn between(&self, sender: Participant, receiver: Participant) -> impl Iterator<Item = &Message> + '_ {
        self.entries
            .iter()
            .filter(move |m| m.sender == sender && m.receiver == receiver)
    }

    /// True if any `sender -> receiver` payload has exactly `raw_width` columns.
    pub fn leaks_width(&self, sender: Participant, receiver: Participant, raw_width: usize) -> bool {
        self.between(sender, receiver).any(|m| m.cols == raw_width)
    }
}

fn check_blocks(parties: &[PartyState], n: usize) -> Result<()> {
    let mut next = 0;
    for p in parties {
        if p.share.columns.start != next || p.share.columns.len() != p.n_features() {
            return Err(Error::invalid(format!(
                "party {} owns columns {:?}; ownership map must be contiguous in party order",
                p.party_id, p.share.columns
            )));
        }
        next = p.share.columns.end;
    }
    check_dim("feature ownership map", n, next)
}

/// Third-party explanation over every raw feature of a vertical model.
///
/// The requester builds all `2^n` synthetic rows, ships each party only its
/// own columns, collects their intermediate representations at the analyst,
/// and solves the attribution from one round of predictions.
pub fn explain_vertical_full(
    parties: &[PartyState],
    model: &dyn SharedModel,
    x: &[f64],
    reference: &ReferenceValue,
    log: &mut MessageLog,
) -> Result<Attribution> {
    let n = x.len();
    check_dim("reference width", n, reference.values.len())?;
    check_blocks(parties, n)?;
    let design = enumerate_coalitions(n)?;
    let synthetic = build_synthetic_inputs(x, &reference.values, &design)?;
    let rows = synthetic.rows();

    let mut reps = Vec::with_capacity(parties.len());
    for p in parties {
        let block = synthetic.col_range(p.share.columns.clone());
        log.record(
            Participant::ThirdParty,
            Participant::Party(p.party_id),
            PayloadKind::SyntheticInputs,
            rows,
            block.cols(),
        );
        let rep = p.represent(&block)?;
        log.record(
            Participant::Party(p.party_id),
            Participant::Analyst,
            PayloadKind::IntermediateRepresentation,
            rows,
            rep.cols(),
        );
        reps.push(rep);
    }
    let blocks: Vec<&DataMatrix> = reps.iter().collect();
    let unified = DataMatrix::hstack(&blocks)?;
    let y = model.predict_proba(&unified)?;
    log.record(
        Participant::Analyst,
        Participant::ThirdParty,
        PayloadKind::Predictions,
        y.len(),
        1,
    );

    let names = parties
        .iter()
        .flat_map(|p| p.share.features.feature_names().iter().cloned())
        .collect();
    let values = x.iter().copied().map(Some).collect();
    Ok(solve_attribution(&design, &y)?
        .with_features(names, values)?
        .with_role(AttributionRole::ThirdPartyFull))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerticalRole {
    Host,
    Guest,
}

/// What the requesting party holds for a partial explanation: its own
/// transform plus the other party's intermediate representations of the
/// sample and of the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalExplainContext {
    pub requester: VerticalRole,
    pub host_features: Range<usize>,
    pub guest_features: Range<usize>,
    pub local_party: usize,
    pub remote_party: usize,
    pub local_names: Vec<String>,
    pub local_transform: LocalTransform,
    pub remote_rep_of_x: Vec<f64>,
    pub remote_rep_of_r: Vec<f64>,
}

impl VerticalExplainContext {
    /// Simulates the other party computing and sending `F(x_remote)` and
    /// `F(r_remote)`. `parties` is `[host, guest]`.
    pub fn negotiate(
        parties: &[PartyState],
        requester: VerticalRole,
        x_remote: &[f64],
        r_remote: &[f64],
        log: &mut MessageLog,
    ) -> Result<Self> {
        let [host, guest] = parties else {
            return Err(Error::invalid(format!(
                "partial explanations need exactly a host and a guest, got {} parties",
                parties.len()
            )));
        };
        check_blocks(parties, guest.share.columns.end)?;
        let (local, remote) = match requester {
            VerticalRole::Host => (host, guest),
            VerticalRole::Guest => (guest, host),
        };
        check_dim("remote instance width", remote.n_features(), x_remote.len())?;
        check_dim("remote reference width", remote.n_features(), r_remote.len())?;
        let pair = DataMatrix::from_values(2, x_remote.len(), [x_remote, r_remote].concat())?;
        let reps = remote.represent(&pair)?;
        for _ in 0..2 {
            log.record(
                Participant::Party(remote.party_id),
                Participant::Party(local.party_id),
                PayloadKind::IntermediateRepresentation,
                1,
                reps.cols(),
            );
        }
        Ok(Self {
            requester,
            host_features: host.share.columns.clone(),
            guest_features: guest.share.columns.clone(),
            local_party: local.party_id,
            remote_party: remote.party_id,
            local_names: local.share.features.feature_names().to_vec(),
            local_transform: local.transform.clone(),
            remote_rep_of_x: reps.row(0).to_vec(),
            remote_rep_of_r: reps.row(1).to_vec(),
        })
    }

    pub fn local_features(&self) -> Range<usize> {
        match self.requester {
            VerticalRole::Host => self.host_features.clone(),
            VerticalRole::Guest => self.guest_features.clone(),
        }
    }
}

/// Partial explanation: the requester's raw features plus one atomic
/// indicator that switches the other party's representation between the
/// sample and the reference. The indicator is the last attribution entry.
pub fn explain_vertical_partial(
    ctx: &VerticalExplainContext,
    model: &dyn SharedModel,
    x_local: &[f64],
    r_local: &[f64],
    log: &mut MessageLog,
) -> Result<Attribution> {
    let h = ctx.local_features().len();
    check_dim("local instance width", h, x_local.len())?;
    check_dim("local reference width", h, r_local.len())?;
    check_dim(
        "remote representation width",
        ctx.remote_rep_of_x.len(),
        ctx.remote_rep_of_r.len(),
    )?;
    let m = h + 1;
    let design = enumerate_coalitions(m)?;
    let rows = design.rows();

    let mut local_values = Vec::with_capacity(rows * h);
    let mut remote_values = Vec::with_capacity(rows * ctx.remote_rep_of_x.len());
    for row in 0..rows {
        local_values.extend((0..h).map(|i| {
            if design.contains(row, i) {
                x_local[i]
            } else {
                r_local[i]
            }
        }));
        let remote = if design.contains(row, h) {
            &ctx.remote_rep_of_x
        } else {
            &ctx.remote_rep_of_r
        };
        remote_values.extend_from_slice(remote);
    }
    let local_raw = DataMatrix::from_values(rows, h, local_values)?;
    let local_rep = ctx.local_transform.apply(&local_raw)?;
    let remote_rep = DataMatrix::from_values(rows, ctx.remote_rep_of_x.len(), remote_values)?;
    let unified = match ctx.requester {
        VerticalRole::Host => DataMatrix::hstack(&[&local_rep, &remote_rep])?,
        VerticalRole::Guest => DataMatrix::hstack(&[&remote_rep, &local_rep])?,
    };
    log.record(
        Participant::Party(ctx.local_party),
        Participant::Analyst,
        PayloadKind::UnifiedBatch,
        rows,
        unified.cols(),
    );
    let y = model.predict_proba(&unified)?;
    log.record(
        Participant::Analyst,
        Participant::Party(ctx.local_party),
        PayloadKind::Predictions,
        y.len(),
        1,
    );

    let mut names = ctx.local_names.clone();
    names.push(DC_FEATURES.to_owned());
    let mut values: Vec<Option<f64>> = x_local.iter().copied().map(Some).collect();
    values.push(None);
    let role = match ctx.requester {
        VerticalRole::Host => AttributionRole::HostPartial,
        VerticalRole::Guest => AttributionRole::GuestPartial,
    };
    Ok(solve_attribution(&design, &y)?
        .with_features(names, values)?
        .with_role(role))
}

/// Per-feature root mean square difference between two attribution tables
/// (rows are samples).
pub fn compare_attributions_rmse(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_dim("attribution sample count", a.len(), b.len())?;
    let Some(first) = a.first() else {
        return Err(Error::invalid("no attributions to compare"));
    };
    let width = first.len();
    let mut sums = vec![0.0; width];
    for (ra, rb) in a.iter().zip(b) {
        check_dim("attribution width", width, ra.len())?;
        check_dim("attribution width", width, rb.len())?;
        for ((s, x), y) in sums.iter_mut().zip(ra).zip(rb) {
            *s += (x - y) * (x - y);
        }
    }
    Ok(sums.into_iter().map(|s| (s / a.len() as f64).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_reference_medians() {
        let data = DataMatrix::from_values(3, 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0]).unwrap();
        let r = anchor_median_reference(&AnchorSet { data }).unwrap();
        assert_eq!(r.values, vec![2.0, 20.0]);
        assert_eq!(r.origin, ReferenceOrigin::AnchorMedian);
        let data = DataMatrix::from_values(4, 1, vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        let r = anchor_reference(&AnchorSet { data }, Aggregate::Median).unwrap();
        assert_eq!(r.values, vec![2.5]);
        let empty = AnchorSet {
            data: DataMatrix::zeros(0, 2),
        };
        assert!(anchor_median_reference(&empty).is_err());
    }

    #[test]
    fn rmse_per_feature() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(compare_attributions_rmse(&a, &a).unwrap(), vec![0.0, 0.0]);
        let b: Vec<Vec<f64>> = a.iter().map(|r| vec![r[0] + 0.1, r[1]]).collect();
        let rmse = compare_attributions_rmse(&a, &b).unwrap();
        assert!((rmse[0] - 0.1).abs() < 1e-12 && rmse[1] == 0.0);
        assert!(compare_attributions_rmse(&a, &b[..1]).is_err());
        assert!(compare_attributions_rmse(&a, &[vec![0.0], vec![0.0]]).is_err());
    }
}
