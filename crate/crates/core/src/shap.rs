//! Exact KernelSHAP over the full coalition power set.
//!
//! Every subset of the `M` features is enumerated once, the model is called
//! a single time on all `2^M` synthetic rows, and the attributions are the
//! coefficients of a Shapley-kernel weighted linear fit. The empty and full
//! coalitions carry infinite kernel weight; they are imposed as hard
//! constraints (`phi_0 = f(r)`, `sum(phi) = f(x) - f(r)`) and eliminated by
//! substitution before the normal equations are solved.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::{default_names, DataMatrix};

/// Largest feature count accepted for exact enumeration.
pub const MAX_FEATURES: usize = 20;

/// Batched black-box predictor: one output per input row.
pub trait BatchModel {
    fn evaluate(&self, batch: &DataMatrix) -> Result<Vec<f64>>;
}

impl<F> BatchModel for F
where
    F: Fn(&DataMatrix) -> Result<Vec<f64>>,
{
    fn evaluate(&self, batch: &DataMatrix) -> Result<Vec<f64>> {
        self(batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowWeight {
    /// Empty or full coalition: enforced exactly rather than weighted.
    Constraint,
    Kernel(f64),
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        c = c * (n - i) as u64 / (i + 1) as u64;
    }
    c
}

/// Shapley kernel `(M-1) / (C(M,s) * s * (M-s))`; `Constraint` for `s` in `{0, M}`.
pub fn shapley_kernel_weight(m: usize, s_size: usize) -> Result<RowWeight> {
    if m == 0 || s_size > m {
        return Err(Error::invalid(format!(
            "coalition size {s_size} invalid for {m} features"
        )));
    }
    if s_size == 0 || s_size == m {
        return Ok(RowWeight::Constraint);
    }
    let denom = binomial(m, s_size) * (s_size * (m - s_size)) as u64;
    Ok(RowWeight::Kernel((m - 1) as f64 / denom as f64))
}

/// All `2^M` coalitions in binary-counting order: row `j` contains feature
/// `i` iff bit `i` of `j` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionDesign {
    m: usize,
    weights: Vec<RowWeight>,
}

pub fn enumerate_coalitions(m: usize) -> Result<CoalitionDesign> {
    if m == 0 {
        return Err(Error::invalid("need at least one feature"));
    }
    if m > MAX_FEATURES {
        return Err(Error::CoalitionCap {
            features: m,
            cap: MAX_FEATURES,
        });
    }
    // weight depends only on |s|
    let by_size = (0..=m)
        .map(|s| shapley_kernel_weight(m, s))
        .collect::<Result<Vec<_>>>()?;
    let weights = (0..1usize << m).map(|j| by_size[j.count_ones() as usize]).collect();
    Ok(CoalitionDesign { m, weights })
}

impl CoalitionDesign {
    pub fn features(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn contains(&self, row: usize, feature: usize) -> bool {
        row >> feature & 1 == 1
    }

    pub fn size(&self, row: usize) -> usize {
        row.count_ones() as usize
    }

    pub fn weight(&self, row: usize) -> RowWeight {
        self.weights[row]
    }

    pub fn full_row(&self) -> usize {
        self.rows() - 1
    }

    /// Row `j` of the binary coalition matrix `S`.
    pub fn indicator_row(&self, row: usize) -> Vec<u8> {
        (0..self.m).map(|i| u8::from(self.contains(row, i))).collect()
    }
}

/// Row `j` takes `x` where coalition `j` is on and `r` elsewhere.
pub fn build_synthetic_inputs(x: &[f64], r: &[f64], design: &CoalitionDesign) -> Result<DataMatrix> {
    check_dim("explained instance width", design.features(), x.len())?;
    check_dim("reference width", design.features(), r.len())?;
    let m = design.features();
    let mut values = Vec::with_capacity(design.rows() * m);
    for row in 0..design.rows() {
        values.extend((0..m).map(|i| if design.contains(row, i) { x[i] } else { r[i] }));
    }
    DataMatrix::from_values(design.rows(), m, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionRole {
    ThirdPartyFull,
    HostPartial,
    GuestPartial,
    Horizontal,
}

/// Base value, per-feature Shapley values, and the model value at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AttributionDoc", into = "AttributionDoc")]
pub struct Attribution {
    pub base: f64,
    pub phi: Vec<f64>,
    pub predicted: f64,
    pub names: Vec<String>,
    /// Feature value at `x`; `None` for aggregated indicators.
    pub values: Vec<Option<f64>>,
    pub role: Option<AttributionRole>,
}

impl Attribution {
    /// `|base + sum(phi) - predicted|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.base + self.phi.iter().sum::<f64>() - self.predicted).abs()
    }

    pub fn with_role(mut self, role: AttributionRole) -> Self {
        self.role = Some(role);
        self
    }

    pub fn with_features(mut self, names: Vec<String>, values: Vec<Option<f64>>) -> Result<Self> {
        check_dim("attribution names", self.phi.len(), names.len())?;
        check_dim("attribution values", self.phi.len(), values.len())?;
        self.names = names;
        self.values = values;
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureEntry {
    name: String,
    value: Option<f64>,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
struct AttributionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    role: Option<AttributionRole>,
    base: f64,
    predicted: f64,
    features: Vec<FeatureEntry>,
}

impl From<Attribution> for AttributionDoc {
    fn from(a: Attribution) -> Self {
        let features = a
            .names
            .into_iter()
            .zip(a.values)
            .zip(a.phi)
            .map(|((name, value), phi)| FeatureEntry { name, value, phi })
            .collect();
        AttributionDoc {
            role: a.role,
            base: a.base,
            predicted: a.predicted,
            features,
        }
    }
}

impl TryFrom<AttributionDoc> for Attribution {
    type Error = Error;

    fn try_from(d: AttributionDoc) -> Result<Self> {
        let (mut names, mut values, mut phi) = (Vec::new(), Vec::new(), Vec::new());
        for f in d.features {
            names.push(f.name);
            values.push(f.value);
            phi.push(f.phi);
        }
        Ok(Attribution {
            base: d.base,
            phi,
            predicted: d.predicted,
            names,
            values,
            role: d.role,
        })
    }
}

/// Constrained weighted least squares over the interior coalitions.
///
/// With `phi_M = total - sum_{i<M} phi_i` substituted, each interior row `s`
/// contributes `y_s - phi_0 - z_M * total ~ sum_{i<M} (z_i - z_M) * phi_i`.
pub fn solve_attribution(design: &CoalitionDesign, y: &[f64]) -> Result<Attribution> {
    check_dim("prediction vector", design.rows(), y.len())?;
    let m = design.features();
    let base = y[0];
    let predicted = y[design.full_row()];
    let total = predicted - base;

    let phi = if m == 1 {
        vec![total]
    } else {
        let p = m - 1;
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        let mut z = vec![0.0; p];
        for (row, &y_row) in y.iter().enumerate() {
            let RowWeight::Kernel(w) = design.weight(row) else {
                continue;
            };
            let last = f64::from(u8::from(design.contains(row, p)));
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = f64::from(u8::from(design.contains(row, i))) - last;
            }
            let t = y_row - base - last * total;
            for i in 0..p {
                if z[i] == 0.0 {
                    continue;
                }
                b[i] += w * z[i] * t;
                for j in 0..p {
                    a[(i, j)] += w * z[i] * z[j];
                }
            }
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("reduced KernelSHAP system is not positive definite".into()))?;
        let head = chol.solve(&b);
        let mut phi: Vec<f64> = head.iter().copied().collect();
        phi.push(total - phi.iter().sum::<f64>());
        phi
    };
    Ok(Attribution {
        base,
        phi,
        predicted,
        names: default_names("x", m),
        values: vec![None; m],
        role: None,
    })
}

pub struct ExplanationRequest<'a> {
    pub x: &'a [f64],
    pub r: &'a [f64],
    pub model: &'a dyn BatchModel,
}

impl<'a> ExplanationRequest<'a> {
    pub fn new(x: &'a [f64], r: &'a [f64], model: &'a dyn BatchModel) -> Result<Self> {
        check_dim("reference width", x.len(), r.len())?;
        if x.is_empty() {
            return Err(Error::invalid("empty instance"));
        }
        Ok(Self { x, r, model })
    }
}

/// Enumerate, build, one batched model call, solve.
pub fn explain(req: &ExplanationRequest<'_>) -> Result<Attribution> {
    let design = enumerate_coalitions(req.x.len())?;
    let batch = build_synthetic_inputs(req.x, req.r, &design)?;
    let y = req.model.evaluate(&batch)?;
    check_dim("model output rows", batch.rows(), y.len())?;
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("model returned {bad}")));
    }
    let attribution = solve_attribution(&design, &y)?;
    let values = req.x.iter().copied().map(Some).collect();
    attribution.with_features(default_names("x", req.x.len()), values)
}

/// Classical Shapley values by direct enumeration, for checking `explain`.
pub mod oracle {
    use super::*;

    pub const MAX_ORACLE_FEATURES: usize = 12;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|v| v as f64).product()
    }

    /// Shapley values of an arbitrary coalition game `v` over `m` players,
    /// where coalitions are bitmasks.
    pub fn shapley_of_game(m: usize, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), 1 << m);
        let total = factorial(m);
        (0..m)
            .map(|i| {
                let bit = 1usize << i;
                (0..1usize << m)
                    .filter(|s| s & bit == 0)
                    .map(|s| {
                        let size = s.count_ones() as usize;
                        let w = factorial(size) * factorial(m - size - 1) / total;
                        w * (v[s | bit] - v[s])
                    })
                    .sum()
            })
            .collect()
    }

    /// `v(S) = f(x on S, r elsewhere)`, evaluated row by row.
    pub fn brute_force_shapley(req: &ExplanationRequest<'_>) -> Result<Attribution> {
        let m = req.x.len();
        if m > MAX_ORACLE_FEATURES {
            return Err(Error::CoalitionCap {
                features: m,
                cap: MAX_ORACLE_FEATURES,
            });
        }
        let mut v = Vec::with_capacity(1 << m);
        for s in 0..1usize << m {
            let masked: Vec<f64> = (0..m)
                .map(|i| if s & (1 << i) != 0 { req.x[i] } else { req.r[i] })
                .collect();
            let row = DataMatrix::from_values(1, m, masked)?;
            v.push(req.model.evaluate(&row)?[0]);
        }
        let phi = shapley_of_game(m, &v);
        Ok(Attribution {
            base: v[0],
            phi,
            predicted: v[(1 << m) - 1],
            names: default_names("x", m),
            values: req.x.iter().copied().map(Some).collect(),
            role: None,
        })
    }
}
