//! Dense row-major table of reals with named columns.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    feature_names: Vec<String>,
}

pub(crate) fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        check_dim("DataMatrix values", rows * cols, values.len())?;
        check_dim("DataMatrix feature names", cols, feature_names.len())?;
        Ok(Self {
            rows,
            cols,
            values,
            feature_names,
        })
    }

    /// Builds a matrix with generated column names `x0, x1, ...`.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(rows, cols, values, default_names("x", cols))
    }

    pub fn from_rows(rows: &[Vec<f64>], feature_names: Vec<String>) -> Result<Self> {
        let cols = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim("DataMatrix row width", cols, row.len())?;
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values, feature_names)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            feature_names: default_names("x", cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        check_dim("DataMatrix feature names", self.cols, names.len())?;
        self.feature_names = names;
        Ok(self)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, and a zero-width matrix still has rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            values,
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.rows * cols.len());
        for row in self.iter_rows() {
            values.extend(cols.iter().map(|&j| row[j]));
        }
        Self {
            rows: self.rows,
            cols: cols.len(),
            values,
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }

    pub fn col_range(&self, range: Range<usize>) -> Self {
        let idx: Vec<usize> = range.collect();
        self.select_cols(&idx)
    }

    pub fn drop_cols(&self, drop: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.cols).filter(|j| !drop.contains(j)).collect();
        self.select_cols(&keep)
    }

    /// Column-wise concatenation; all blocks must have the same row count.
    pub fn hstack(blocks: &[&DataMatrix]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        for b in blocks {
            check_dim("hstack row count", rows, b.rows)?;
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for b in blocks {
                values.extend_from_slice(b.row(i));
            }
        }
        let feature_names = blocks.iter().flat_map(|b| b.feature_names.iter().cloned()).collect();
        Self::new(rows, cols, values, feature_names)
    }

    /// Row-wise concatenation; column names are taken from the first block.
    pub fn vstack(blocks: &[&DataMatrix]) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::invalid("vstack of zero blocks"));
        };
        let mut values = Vec::new();
        let mut rows = 0;
        for b in blocks {
            check_dim("vstack column count", first.cols, b.cols)?;
            values.extend_from_slice(&b.values);
            rows += b.rows;
        }
        Self::new(rows, first.cols, values, first.feature_names.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Per-column (min, max).
    pub fn column_ranges(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); self.cols];
        for row in self.iter_rows() {
            for (r, &v) in out.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.iter_rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        let n = self.rows.max(1) as f64;
        sums.into_iter().map(|s| s / n).collect()
    }

    /// Per-column median; even counts average the two middle values.
    pub fn column_medians(&self) -> Vec<f64> {
        (0..self.cols).map(|j| median(&mut self.column(j))).collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>, feature_names: Vec<String>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            values.extend(m.row(i).iter().copied());
        }
        Self::new(rows, cols, values, feature_names)
    }
}

/// Median of a non-empty slice (sorted in place). NaN-free input assumed.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    feature_names: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl From<DataMatrix> for MatrixDoc {
    fn from(m: DataMatrix) -> Self {
        let values = m.iter_rows().map(<[f64]>::to_vec).collect();
        MatrixDoc {
            feature_names: m.feature_names,
            values,
        }
    }
}

impl TryFrom<MatrixDoc> for DataMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        DataMatrix::from_rows(&doc.values, doc.feature_names)
    }
}

/// Serde adapter storing a `DMatrix<f64>` as an array of row arrays.
pub(crate) mod nested {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        (m.ncols(), rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let (cols, rows) = <(usize, Vec<Vec<f64>>)>::deserialize(d)?;
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians_follow_even_count_convention() {
        let m = DataMatrix::from_rows(
            &[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]],
            default_names("f", 2),
        )
        .unwrap();
        assert_eq!(m.column_medians(), vec![2.0, 20.0]);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn hstack_then_split_recovers_blocks() {
        let a = DataMatrix::from_values(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DataMatrix::from_values(2, 1, vec![5.0, 6.0]).unwrap();
        let c = DataMatrix::hstack(&[&a, &b]).unwrap();
        assert_eq!(c.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(c.col_range(0..2).values(), a.values());
        assert!(DataMatrix::hstack(&[&a, &DataMatrix::zeros(3, 1)]).is_err());
    }

    #[test]
    fn json_uses_nested_rows() {
        let a = DataMatrix::from_values(2, 2, vec![0.1, 2.0, 3.0, 1e-300]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.contains("[[0.1,2.0],[3.0,1e-300]]"), "{s}");
        let back: DataMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
    }
}
