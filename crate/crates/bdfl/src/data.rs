//! Dataset ingestion, preprocessing and vertical feature splitting.

use crate::error::DataError;
use crate::model::{FeatureMatrix, LabelVector};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

/// Which data party owns a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Owner {
    PartyA,
    PartyB,
}

/// Raw table straight out of a CSV: dense features plus mapped labels,
/// row order preserved.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub features: DMatrix<f64>,
    pub labels: DVector<f64>,
}

/// How to split feature columns between the two data parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Global column indices held by party A; party B gets the complement.
    pub party_a_columns: Vec<usize>,
    pub seed: u64,
    pub shuffle: bool,
}

/// A vertically split, standardized, train/test-partitioned dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalDataset {
    pub x_a: FeatureMatrix,
    pub x_b: FeatureMatrix,
    pub y: LabelVector,
    pub x_a_test: FeatureMatrix,
    pub x_b_test: FeatureMatrix,
    pub y_test: LabelVector,
    /// Retained global column index -> owning party, in retained order.
    pub feature_assignment: Vec<(usize, Owner)>,
    /// Per retained column `(mean, std)` fitted on the training rows,
    /// identity when standardization is off.
    pub standardization: Vec<(f64, f64)>,
    /// Global indices of zero-variance columns that were dropped.
    pub dropped_columns: Vec<usize>,
}

impl VerticalDataset {
    pub fn train_rows(&self) -> usize {
        self.x_a.rows()
    }

    pub fn test_rows(&self) -> usize {
        self.x_a_test.rows()
    }

    pub fn n_a(&self) -> usize {
        self.x_a.cols()
    }

    pub fn n_b(&self) -> usize {
        self.x_b.cols()
    }
}

/// Loads a CSV of numeric feature columns plus one label column.
///
/// `label_mapping` maps raw label cells (as written in the file) to `-1`
/// or `+1`; keys that parse as numbers also match numerically, so `"1"`
/// covers a `1.0` cell.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: usize,
    label_mapping: &BTreeMap<String, i8>,
    has_header: bool,
) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_csv_reader(file, label_column, label_mapping, has_header)
}

/// Reader-based variant of [`load_csv`]; this is the parsing entry point
/// exercised by the fuzz targets.
pub fn load_csv_reader<R: Read>(
    reader: R,
    label_column: usize,
    label_mapping: &BTreeMap<String, i8>,
    has_header: bool,
) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let numeric_keys: Vec<(f64, i8)> = label_mapping
        .iter()
        .filter_map(|(k, &v)| k.parse::<f64>().ok().map(|f| (f, v)))
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue; // blank line
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::RaggedRow { row, expected, got: record.len() });
        }
        if label_column >= expected {
            return Err(DataError::LabelColumnOutOfRange {
                label_column,
                columns: expected,
            });
        }
        let mut feat = Vec::with_capacity(expected - 1);
        for (col, cell) in record.iter().enumerate() {
            if col == label_column {
                let mapped = label_mapping.get(cell).copied().or_else(|| {
                    cell.parse::<f64>().ok().and_then(|f| {
                        numeric_keys.iter().find(|(k, _)| *k == f).map(|&(_, v)| v)
                    })
                });
                match mapped {
                    Some(v) => labels.push(v as f64),
                    None => {
                        return Err(DataError::UnmappedLabel { row, cell: cell.to_string() })
                    }
                }
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => feat.push(v),
                    _ => {
                        return Err(DataError::NonNumericCell {
                            row,
                            col,
                            cell: cell.to_string(),
                        })
                    }
                }
            }
        }
        rows.push(feat);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let n_features = rows[0].len();
    let features = DMatrix::from_fn(rows.len(), n_features, |r, c| rows[r][c]);
    Ok(RawTable { features, labels: DVector::from_vec(labels) })
}

/// Shuffles, splits train/test, fits standardization on the training rows
/// and routes columns to the parties.
///
/// The training partition takes `floor((1 - test_fraction) * rows)` rows;
/// the remainder is the held-out test set.
pub fn split_and_standardize(
    raw: &RawTable,
    spec: &SplitSpec,
    test_fraction: f64,
    standardize: bool,
) -> Result<VerticalDataset, DataError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(DataError::BadParameter(format!(
            "test_fraction {test_fraction} outside [0, 1)"
        )));
    }
    let rows = raw.features.nrows();
    let cols = raw.features.ncols();
    if rows == 0 {
        return Err(DataError::Empty);
    }
    validate_split(spec, cols)?;

    let mut order: Vec<usize> = (0..rows).collect();
    if spec.shuffle {
        let mut rng = ChaCha20Rng::seed_from_u64(spec.seed ^ 0x7368_7566_666c_6500);
        order.shuffle(&mut rng);
    }
    let train_rows = ((1.0 - test_fraction) * rows as f64).floor() as usize;
    if train_rows == 0 {
        return Err(DataError::BadParameter("empty training partition".into()));
    }
    let (train_idx, test_idx) = order.split_at(train_rows);

    // standardization fitted on train only
    let mut stats = Vec::with_capacity(cols);
    let mut dropped = Vec::new();
    for c in 0..cols {
        if standardize {
            let mean =
                train_idx.iter().map(|&r| raw.features[(r, c)]).sum::<f64>() / train_rows as f64;
            let var = train_idx
                .iter()
                .map(|&r| (raw.features[(r, c)] - mean).powi(2))
                .sum::<f64>()
                / train_rows as f64;
            let std = var.sqrt();
            if std < 1e-12 {
                log::warn!("dropping zero-variance column {c}");
                dropped.push(c);
                stats.push(None);
            } else {
                stats.push(Some((mean, std)));
            }
        } else {
            stats.push(Some((0.0, 1.0)));
        }
    }

    let mut assignment = Vec::new();
    let mut standardization = Vec::new();
    for c in 0..cols {
        if let Some(ms) = stats[c] {
            let owner = if spec.party_a_columns.contains(&c) { Owner::PartyA } else { Owner::PartyB };
            assignment.push((c, owner));
            standardization.push(ms);
        }
    }

    let slice = |idx: &[usize], owner: Owner| -> Result<FeatureMatrix, DataError> {
        let cols: Vec<usize> = assignment
            .iter()
            .filter(|(_, o)| *o == owner)
            .map(|(c, _)| *c)
            .collect();
        let m = DMatrix::from_fn(idx.len(), cols.len(), |r, k| {
            let c = cols[k];
            let (mean, std) = stats[c].unwrap();
            (raw.features[(idx[r], c)] - mean) / std
        });
        Ok(FeatureMatrix::new(m)?)
    };
    let pick_labels = |idx: &[usize]| -> Result<LabelVector, DataError> {
        Ok(LabelVector::new(DVector::from_fn(idx.len(), |r, _| raw.labels[idx[r]]))?)
    };

    Ok(VerticalDataset {
        x_a: slice(train_idx, Owner::PartyA)?,
        x_b: slice(train_idx, Owner::PartyB)?,
        y: pick_labels(train_idx)?,
        x_a_test: slice(test_idx, Owner::PartyA)?,
        x_b_test: slice(test_idx, Owner::PartyB)?,
        y_test: pick_labels(test_idx)?,
        feature_assignment: assignment,
        standardization,
        dropped_columns: dropped,
    })
}

fn validate_split(spec: &SplitSpec, cols: usize) -> Result<(), DataError> {
    let mut seen = vec![false; cols];
    for &c in &spec.party_a_columns {
        if c >= cols {
            return Err(DataError::BadColumnSplit(format!(
                "column {c} out of range for {cols} features"
            )));
        }
        if seen[c] {
            return Err(DataError::BadColumnSplit(format!("column {c} listed twice")));
        }
        seen[c] = true;
    }
    Ok(())
}

/// Two well-separated Gaussians with a planted direction; party A holds the
/// first `n_a` columns. Useful for fast tests that need a dataset a linear
/// model can actually fit.
pub fn synthetic_dataset(
    t: usize,
    n_a: usize,
    n_b: usize,
    seed: u64,
    separation: f64,
) -> Result<VerticalDataset, DataError> {
    if t == 0 {
        return Err(DataError::Empty);
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(DataError::BadParameter(format!("separation {separation}")));
    }
    let n = n_a + n_b;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x73796e_7468);
    let mut dir = DVector::from_fn(n, |_, _| gaussian(&mut rng));
    let norm = dir.norm();
    if norm > 0.0 {
        dir /= norm;
    }
    let mut features = DMatrix::zeros(t, n);
    let mut labels = DVector::zeros(t);
    for i in 0..t {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        labels[i] = y;
        for j in 0..n {
            features[(i, j)] = y * separation / 2.0 * dir[j] + gaussian(&mut rng);
        }
    }
    let raw = RawTable { features, labels };
    let spec = SplitSpec { party_a_columns: (0..n_a).collect(), seed, shuffle: true };
    split_and_standardize(&raw, &spec, 0.2, true)
}

/// Standard normal via Box-Muller.
fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
