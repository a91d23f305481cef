//! Tabular datasets: CSV ingestion, stratified splits, scaling and column
//! permutation.

mod csv_io;
mod scaler;
mod split;

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use thiserror::Error;

use crate::ordering::Permutation;

pub use csv_io::{load_csv, load_csv_from_reader, write_csv};
pub use scaler::{apply_scaler, fit_scaler, ScaleMode, Scaler, ScalerParams, MINMAX_CLAMP};
pub use split::{stratified_indices, stratified_split, SplitIndices, SplitSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("target column `{0}` not found in header")]
    MissingTarget(String),
    #[error("column `{0}` listed in drop_columns is not in the header")]
    UnknownDropColumn(String),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("non-numeric value `{value}` in column `{column}` (data row {row})")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("no usable rows ({dropped} dropped for missing values)")]
    NoRows { dropped: usize },
    #[error("no feature columns left after removing target and dropped columns")]
    NoFeatures,
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("dataset too small to split: {0}")]
    TooSmall(String),
    #[error("scaler has not been fitted")]
    UnfittedScaler,
    #[error("feature count mismatch: expected {expected}, found {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("invalid permutation: {0}")]
    BadPermutation(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// A labelled numeric table: `n` samples by `m` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
    /// Index into `class_names` for every row.
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset and checks its invariants.
    pub fn new(
        values: Array2<f64>,
        feature_names: Vec<String>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, m) = values.dim();
        if feature_names.len() != m {
            return Err(DataError::Inconsistent(format!(
                "{} feature names for {m} columns",
                feature_names.len()
            )));
        }
        if labels.len() != n {
            return Err(DataError::Inconsistent(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(DataError::Inconsistent(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Inconsistent("non-finite value".into()));
        }
        Ok(Self {
            values,
            feature_names,
            labels,
            class_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Number of rows per class, indexed like `class_names`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// A new dataset with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            values: self.values.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Row-major copy of the feature matrix.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }
}

/// Reorders columns so that output column `j` is input column `perm[j]`.
pub fn apply_permutation(d: &Dataset, perm: &Permutation) -> Result<Dataset> {
    let m = d.n_features();
    if perm.len() != m {
        return Err(DataError::BadPermutation(format!(
            "length {} for {m} features",
            perm.len()
        )));
    }
    perm.check_bijective(m)
        .map_err(|e| DataError::BadPermutation(e.to_string()))?;
    let order = perm.order();
    Ok(Dataset {
        values: d.values.select(Axis(1), order),
        feature_names: order.iter().map(|&i| d.feature_names[i].clone()).collect(),
        labels: d.labels.clone(),
        class_names: d.class_names.clone(),
    })
}

/// The permutation that undoes `perm` under [`apply_permutation`].
pub fn invert_permutation(perm: &Permutation) -> Result<Permutation> {
    let n = perm.len();
    perm.check_bijective(n)
        .map_err(|e| DataError::BadPermutation(e.to_string()))?;
    let mut inv = vec![0; n];
    for (pos, &src) in perm.order().iter().enumerate() {
        inv[src] = pos;
    }
    Ok(Permutation::global(inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn abc() -> Dataset {
        Dataset::new(
            array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
            vec!["a".into(), "b".into(), "c".into()],
            vec![0, 1],
            vec!["x".into(), "y".into()],
        )
        .unwrap()
    }

    #[test]
    fn identity_permutation_is_noop() {
        let d = abc();
        let out = apply_permutation(&d, &Permutation::identity(3)).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn permutation_moves_columns() {
        let d = abc();
        let out = apply_permutation(&d, &Permutation::global(vec![2, 0, 1])).unwrap();
        assert_eq!(out.feature_names, vec!["c", "a", "b"]);
        assert_eq!(out.values, array![[3.0, 1.0, 2.0], [6.0, 4.0, 5.0]]);
        let back = apply_permutation(&out, &invert_permutation(&Permutation::global(vec![2, 0, 1])).unwrap())
            .unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn bad_permutations_rejected() {
        let d = abc();
        assert!(apply_permutation(&d, &Permutation::global(vec![0, 1])).is_err());
        assert!(apply_permutation(&d, &Permutation::global(vec![0, 1, 1])).is_err());
        assert!(invert_permutation(&Permutation::global(vec![0, 3, 1])).is_err());
    }

    #[test]
    fn duplicate_feature_names_rejected() {
        let err = Dataset::new(
            array![[1.0, 2.0]],
            vec!["a".into(), "a".into()],
            vec![0],
            vec!["x".into()],
        );
        assert!(matches!(err, Err(DataError::DuplicateColumn(_))));
    }
}
