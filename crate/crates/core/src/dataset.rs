//! Tabular ingest, train/test splitting, and horizontal/vertical partitioning.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::DataMatrix;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent seed for one named random stream of a run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r.next_u64()
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: DataMatrix,
    pub labels: Vec<usize>,
    /// Original label text for each class index.
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: DataMatrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        check_dim("labels", features.rows(), labels.len())?;
        if class_names.len() < 2 {
            return Err(Error::invalid("a labeled dataset needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::invalid(format!("label {bad} outside 0..{}", class_names.len())));
        }
        Ok(Self {
            features,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Fraction of rows labeled with `class`.
    pub fn class_rate(&self, class: usize) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == class).count() as f64 / self.labels.len() as f64
    }
}

/// Reads a headered CSV. Numeric columns become reals; any column with a
/// non-numeric cell is label-encoded in first-seen order.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |e: csv::Error| -> Error {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            other => Error::Malformed {
                path: path.to_path_buf(),
                line,
                message: format!("{other:?}"),
            },
        }
    };
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::NoDataRows {
            path: path.to_path_buf(),
        });
    }
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn {
            path: path.to_path_buf(),
            column: label_column.to_owned(),
        })?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        lines.push(record.position().map_or(0, |p| p.line()));
        for (col, cell) in cells.iter_mut().zip(record.iter()) {
            col.push(cell.to_owned());
        }
    }
    let n = lines.len();
    if n == 0 {
        return Err(Error::NoDataRows {
            path: path.to_path_buf(),
        });
    }

    let mut feature_names = Vec::new();
    let mut columns = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        columns.push(encode_column(path, name, &cells[j], &lines)?);
        feature_names.push(name.clone());
    }
    let mut values = Vec::with_capacity(n * columns.len());
    for i in 0..n {
        values.extend(columns.iter().map(|c| c[i]));
    }
    let features = DataMatrix::new(n, columns.len(), values, feature_names)?;
    let (labels, class_names) = encode_labels(path, label_column, &cells[label_idx], &lines)?;
    LabeledDataset::new(features, labels, class_names)
}

fn unparseable(path: &Path, column: &str, line: u64, value: &str) -> Error {
    Error::UnparseableCell {
        path: path.to_path_buf(),
        line,
        column: column.to_owned(),
        value: value.to_owned(),
    }
}

fn encode_column(path: &Path, name: &str, cells: &[String], lines: &[u64]) -> Result<Vec<f64>> {
    for (cell, &line) in cells.iter().zip(lines) {
        if cell.is_empty() {
            return Err(unparseable(path, name, line, cell));
        }
        if let Ok(v) = cell.parse::<f64>() {
            if !v.is_finite() {
                return Err(unparseable(path, name, line, cell));
            }
        }
    }
    let numeric: Option<Vec<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
    if let Some(v) = numeric {
        return Ok(v);
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    Ok(cells
        .iter()
        .map(|c| {
            let next = seen.len();
            *seen.entry(c.as_str()).or_insert(next) as f64
        })
        .collect())
}

fn encode_labels(path: &Path, name: &str, cells: &[String], lines: &[u64]) -> Result<(Vec<usize>, Vec<String>)> {
    if let Some((cell, &line)) = cells.iter().zip(lines).find(|(c, _)| c.is_empty()) {
        return Err(unparseable(path, name, line, cell));
    }
    let integral: Option<Vec<usize>> = cells.iter().map(|c| c.parse::<usize>().ok()).collect();
    let (labels, class_names) = match integral {
        Some(labels) => {
            let max = labels.iter().copied().max().unwrap_or(0);
            (labels, (0..=max).map(|c| c.to_string()).collect::<Vec<_>>())
        }
        None => {
            let mut names: Vec<String> = Vec::new();
            let mut seen: HashMap<&str, usize> = HashMap::new();
            let labels = cells
                .iter()
                .map(|c| {
                    *seen.entry(c.as_str()).or_insert_with(|| {
                        names.push(c.clone());
                        names.len() - 1
                    })
                })
                .collect();
            (labels, names)
        }
    };
    if class_names.len() < 2 {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: format!("label column `{name}` has fewer than two classes"),
        });
    }
    Ok((labels, class_names))
}

/// Drops `fnlwgt` and `education` and orients the income label so that
/// class 1 is the `>50K` bracket.
pub fn preprocess_adult(ds: &LabeledDataset) -> Result<LabeledDataset> {
    let mut drop = Vec::new();
    for name in ["fnlwgt", "education"] {
        let idx = ds
            .features
            .column_index(name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))?;
        drop.push(idx);
    }
    if ds.n_classes() != 2 {
        return Err(Error::invalid(format!(
            "income label must be binary, found {} classes",
            ds.n_classes()
        )));
    }
    let features = ds.features.drop_cols(&drop);
    let high = ds
        .class_names
        .iter()
        .position(|c| c.trim_end_matches('.') == ">50K")
        .unwrap_or(1);
    let (labels, class_names) = if high == 1 {
        (ds.labels.clone(), ds.class_names.clone())
    } else {
        (
            ds.labels.iter().map(|&l| 1 - l).collect(),
            vec![ds.class_names[1].clone(), ds.class_names[0].clone()],
        )
    };
    LabeledDataset::new(features, labels, class_names)
}

/// Seeded shuffle, then the first `round(n * test_fraction)` shuffled rows
/// become the test set. Both halves keep shuffled order.
pub fn split_train_test(
    ds: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = ds.len();
    if n < 2 {
        return Err(Error::invalid("need at least two rows to split"));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let perm = permutation(n, seed);
    Ok((ds.select_rows(&perm[n_test..]), ds.select_rows(&perm[..n_test])))
}

/// Sets aside `count` randomly chosen rows; returns `(rest, held_out)`.
pub fn hold_out(ds: &LabeledDataset, count: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if count == 0 || count >= ds.len() {
        return Err(Error::invalid(format!("cannot hold out {count} of {} rows", ds.len())));
    }
    let perm = permutation(ds.len(), seed);
    Ok((ds.select_rows(&perm[count..]), ds.select_rows(&perm[..count])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    Horizontal,
    Vertical,
}

/// Inclusive feature-index range `[first, last]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBlock(pub usize, pub usize);

impl FeatureBlock {
    pub fn range(self) -> Range<usize> {
        self.0..self.1 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    pub party_count: usize,
    /// Share of positive-label rows given to the first party.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_split: Option<Vec<FeatureBlock>>,
}

impl PartitionSpec {
    pub fn horizontal(party_count: usize) -> Self {
        Self {
            mode: PartitionMode::Horizontal,
            party_count,
            bias: None,
            feature_split: None,
        }
    }

    pub fn biased(bias: f64) -> Self {
        Self {
            bias: Some(bias),
            ..Self::horizontal(2)
        }
    }

    pub fn vertical(blocks: Vec<FeatureBlock>) -> Self {
        Self {
            mode: PartitionMode::Vertical,
            party_count: blocks.len(),
            bias: None,
            feature_split: Some(blocks),
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.party_count == 0 {
            return Err(Error::invalid("party_count must be at least 1"));
        }
        match self.mode {
            PartitionMode::Horizontal => {
                if self.feature_split.is_some() {
                    return Err(Error::invalid("feature_split is only valid in vertical mode"));
                }
                if let Some(b) = self.bias {
                    if !(0.0..=1.0).contains(&b) {
                        return Err(Error::invalid(format!("bias {b} outside [0, 1]")));
                    }
                    if self.party_count < 2 {
                        return Err(Error::invalid("a biased split needs at least two parties"));
                    }
                }
            }
            PartitionMode::Vertical => {
                if self.bias.is_some() {
                    return Err(Error::invalid("bias is only valid in horizontal mode"));
                }
                let blocks = self
                    .feature_split
                    .as_ref()
                    .ok_or_else(|| Error::invalid("vertical mode requires feature_split"))?;
                check_dim("feature_split blocks", self.party_count, blocks.len())?;
                let mut sorted = blocks.clone();
                sorted.sort_by_key(|b| b.0);
                let mut next = 0;
                for b in &sorted {
                    if b.0 > b.1 || b.0 != next {
                        return Err(Error::invalid(format!(
                            "feature blocks must be disjoint and cover 0..{n_features}; got {blocks:?}"
                        )));
                    }
                    next = b.1 + 1;
                }
                if next != n_features {
                    return Err(Error::invalid(format!(
                        "feature blocks must be disjoint and cover 0..{n_features}; got {blocks:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One party's slice of a partitioned dataset. Vertical guests carry no labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyShare {
    pub features: DataMatrix,
    pub labels: Option<Vec<usize>>,
    pub class_names: Vec<String>,
    /// Global column indices held by this party.
    pub columns: Range<usize>,
}

impl PartyShare {
    pub fn from_labeled(ds: LabeledDataset) -> Self {
        let cols = ds.n_features();
        Self {
            features: ds.features,
            labels: Some(ds.labels),
            class_names: ds.class_names,
            columns: 0..cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    pub fn to_labeled(&self) -> Option<LabeledDataset> {
        self.labels.as_ref().map(|labels| LabeledDataset {
            features: self.features.clone(),
            labels: labels.clone(),
            class_names: self.class_names.clone(),
        })
    }
}

pub fn partition(ds: &LabeledDataset, spec: &PartitionSpec, seed: u64) -> Result<Vec<PartyShare>> {
    spec.validate(ds.n_features())?;
    match spec.mode {
        PartitionMode::Vertical => {
            let blocks = spec.feature_split.as_deref().unwrap_or_default();
            Ok(blocks
                .iter()
                .enumerate()
                .map(|(p, b)| PartyShare {
                    features: ds.features.col_range(b.range()),
                    labels: (p == 0).then(|| ds.labels.clone()),
                    class_names: ds.class_names.clone(),
                    columns: b.range(),
                })
                .collect())
        }
        PartitionMode::Horizontal => {
            let assignment = match spec.bias {
                None => stratified_assignment(ds, spec.party_count, seed),
                Some(b) => biased_assignment(ds, spec.party_count, b, seed)?,
            };
            Ok(assignment
                .into_iter()
                .map(|mut rows| {
                    rows.sort_unstable();
                    PartyShare::from_labeled(ds.select_rows(&rows))
                })
                .collect())
        }
    }
}

fn class_members(ds: &LabeledDataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.n_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Deals each class's shuffled rows round-robin, continuing the rotation
/// across classes so party sizes differ by at most one.
fn stratified_assignment(ds: &LabeledDataset, parties: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng(seed);
    let mut out = vec![Vec::new(); parties];
    let mut turn = 0;
    for mut members in class_members(ds) {
        members.shuffle(&mut rng);
        for i in members {
            out[turn % parties].push(i);
            turn += 1;
        }
    }
    out
}

/// Party 0 receives `round(bias * P)` of the `P` positive rows and enough
/// negatives to make its share exactly `P` rows; everything else is dealt
/// stratified over the remaining parties.
fn biased_assignment(ds: &LabeledDataset, parties: usize, bias: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if ds.n_classes() != 2 {
        return Err(Error::invalid("a biased split requires binary labels"));
    }
    let mut rng = rng(seed);
    let mut by_class = class_members(ds);
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    let (neg, pos) = (&by_class[0], &by_class[1]);
    let n_pos = ((bias * pos.len() as f64).round() as usize).min(pos.len());
    let n_neg = (pos.len() - n_pos).min(neg.len());

    let mut out = vec![Vec::new(); parties];
    out[0].extend_from_slice(&pos[..n_pos]);
    out[0].extend_from_slice(&neg[..n_neg]);
    let mut turn = 0;
    for rest in [&neg[n_neg..], &pos[n_pos..]] {
        for &i in rest {
            out[1 + turn % (parties - 1)].push(i);
            turn += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label_column: String,
}

/// Maps dataset names to local files. Relative paths resolve against the
/// manifest's own directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    base: PathBuf,
    entries: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: BTreeMap<String, ManifestEntry> =
            serde_json::from_str(&text).map_err(|e| Error::Document(format!("{}: {e}", path.display())))?;
        Ok(Self {
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries,
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entry(&self, name: &str) -> Option<&ManifestEntry> {
        self.entries.get(name)
    }

    pub fn resolve(&self, name: &str) -> Option<PathBuf> {
        self.entries.get(name).map(|e| self.base.join(&e.path))
    }

    pub fn load_dataset(&self, name: &str) -> Result<LabeledDataset> {
        let entry = self
            .entry(name)
            .ok_or_else(|| Error::invalid(format!("dataset `{name}` not in manifest")))?;
        load_csv(self.base.join(&entry.path), &entry.label_column)
    }
}
