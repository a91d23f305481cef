use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::{info, warn};
use ndarray::Array2;

use super::{DataError, Dataset, Result};

const MISSING: [&str; 6] = ["", "na", "n/a", "nan", "?", "null"];

fn is_missing(cell: &str) -> bool {
    let t = cell.trim().to_ascii_lowercase();
    MISSING.contains(&t.as_str())
}

/// Reads a headed CSV file. The target column becomes the labels, the
/// columns in `drop_columns` are discarded and everything else must be
/// numeric. Rows with a missing cell are skipped and counted.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    drop_columns: &[String],
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let d = load_csv_from_reader(file, target_column, drop_columns)?;
    info!(
        "loaded {}: {} rows x {} features, {} classes",
        path.display(),
        d.n_samples(),
        d.n_features(),
        d.n_classes()
    );
    Ok(d)
}

pub fn load_csv_from_reader<R: Read>(
    reader: R,
    target_column: &str,
    drop_columns: &[String],
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut positions = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if positions.insert(h.as_str(), i).is_some() {
            return Err(DataError::DuplicateColumn(h.clone()));
        }
    }
    let target_idx = *positions
        .get(target_column)
        .ok_or_else(|| DataError::MissingTarget(target_column.to_string()))?;
    for d in drop_columns {
        if !positions.contains_key(d.as_str()) {
            return Err(DataError::UnknownDropColumn(d.clone()));
        }
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != target_idx && !drop_columns.iter().any(|d| *d == header[i]))
        .collect();
    if feature_cols.is_empty() {
        return Err(DataError::NoFeatures);
    }

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dropped = 0usize;
    let mut n = 0usize;
    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let target = record.get(target_idx).unwrap_or("");
        if is_missing(target) || feature_cols.iter().any(|&c| is_missing(record.get(c).unwrap_or(""))) {
            dropped += 1;
            continue;
        }
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                DataError::NonNumeric {
                    column: header[c].clone(),
                    row: row_no + 1,
                    value: cell.to_string(),
                }
            })?;
            values.push(v);
        }
        raw_labels.push(target.trim().to_string());
        n += 1;
    }
    if dropped > 0 {
        warn!("dropped {dropped} rows with missing values");
    }
    if n == 0 {
        return Err(DataError::NoRows { dropped });
    }

    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = raw_labels
        .iter()
        .map(|l| class_names.binary_search(l).expect("class present"))
        .collect();
    let m = feature_cols.len();
    let values = Array2::from_shape_vec((n, m), values)
        .map_err(|e| DataError::Inconsistent(e.to_string()))?;
    let feature_names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::new(values, feature_names, labels, class_names)
}

/// Writes features followed by the label column.
pub fn write_csv<W: Write>(d: &Dataset, target_column: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.push(target_column);
    w.write_record(&header)?;
    for (row, &label) in d.values.rows().into_iter().zip(&d.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(d.class_names[label].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}
