//! Thin wrappers over nalgebra's SVD with a fixed ordering and sign convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular triplets sorted by descending singular value.
pub(crate) struct SortedSvd {
    pub u: Option<DMatrix<f64>>,
    pub singular: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SortedSvd {
    pub fn new(m: &DMatrix<f64>, want_u: bool) -> Result<Self> {
        let svd = m.clone().svd(want_u, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let singular = DVector::from_iterator(order.len(), order.iter().map(|&i| s[i]));
        let v = DMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
        let u = match (want_u, svd.u) {
            (true, Some(u)) => Some(DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])])),
            (true, None) => return Err(Error::Numerical("SVD did not return left singular vectors".into())),
            (false, _) => None,
        };
        Ok(Self { u, singular, v })
    }

    /// Numerical rank with the usual `max(m, n) * eps * s_max` cutoff.
    pub fn rank(&self, shape: (usize, usize)) -> usize {
        let s_max = self.singular.iter().copied().fold(0.0, f64::max);
        let tol = shape.0.max(shape.1) as f64 * f64::EPSILON * s_max;
        self.singular.iter().filter(|&&s| s > tol).count()
    }
}

/// Flips each column so its largest-magnitude entry is positive (first index
/// wins ties). Returns the applied signs.
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        let sign = if !col.is_empty() && col[best] < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            col.neg_mut();
        }
        signs.push(sign);
    }
    signs
}

/// Moore-Penrose pseudoinverse via the sorted SVD.
pub(crate) fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = SortedSvd::new(m, true)?;
    let rank = svd.rank(m.shape());
    let u = svd.u.as_ref().expect("requested U");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for k in 0..rank {
        let scale = 1.0 / svd.singular[k];
        out += (svd.v.column(k) * scale) * u.column(k).transpose();
    }
    Ok(out)
}

pub(crate) fn is_orthonormal(m: &DMatrix<f64>, tol: f64) -> bool {
    let gram = m.transpose() * m;
    let eye = DMatrix::<f64>::identity(m.ncols(), m.ncols());
    (gram - eye).amax() <= tol
}
