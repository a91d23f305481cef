use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};
use crate::rng::{seeded, Stream};

const FRACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            val_fraction: 0.15,
            test_fraction: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || (f.iter().sum::<f64>() - 1.0).abs() > FRACTION_TOL {
            return Err(DataError::BadFractions(f));
        }
        Ok(())
    }
}

/// Row indices of each split, ascending within a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn floor_tol(x: f64) -> usize {
    (x + 1e-9).floor() as usize
}

/// Largest-remainder apportionment of `n` items. Equal remainders go to the
/// later part first.
pub(crate) fn largest_remainder(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = fractions.iter().map(|f| n as f64 * f).collect();
    let mut sizes = [0usize; 3];
    for (s, q) in quotas.iter().enumerate() {
        sizes[s] = floor_tol(*q).min(n);
    }
    let assigned: usize = sizes.iter().sum();
    let mut by_rem: Vec<usize> = (0..3).collect();
    by_rem.sort_by(|&a, &b| {
        let ra = quotas[a] - sizes[a] as f64;
        let rb = quotas[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(b.cmp(&a))
    });
    for &s in by_rem.iter().take(n.saturating_sub(assigned)) {
        sizes[s] += 1;
    }
    sizes
}

/// Per-class split counts whose row sums are the class sizes and whose
/// column sums are the largest-remainder split sizes.
fn allocate(class_sizes: &[usize], fractions: &[f64; 3]) -> Vec<[usize; 3]> {
    let n: usize = class_sizes.iter().sum();
    let targets = largest_remainder(n, fractions);
    let mut counts: Vec<[usize; 3]> = Vec::with_capacity(class_sizes.len());
    let mut cells = Vec::new();
    for (c, &nc) in class_sizes.iter().enumerate() {
        let mut row = [0usize; 3];
        for s in 0..3 {
            let q = nc as f64 * fractions[s];
            row[s] = floor_tol(q);
            cells.push((q - row[s] as f64, s, c));
        }
        counts.push(row);
    }
    let mut need_row: Vec<usize> = class_sizes
        .iter()
        .zip(&counts)
        .map(|(&nc, row)| nc.saturating_sub(row.iter().sum()))
        .collect();
    let mut need_col = [0usize; 3];
    for s in 0..3 {
        let have: usize = counts.iter().map(|r| r[s]).sum();
        need_col[s] = targets[s].saturating_sub(have);
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    for &(frac, s, c) in &cells {
        if frac > 1e-12 && need_row[c] > 0 && need_col[s] > 0 {
            counts[c][s] += 1;
            need_row[c] -= 1;
            need_col[s] -= 1;
        }
    }
    // Whatever is left cannot be placed on a fractional cell; any cell will do.
    for c in 0..class_sizes.len() {
        for s in (0..3).rev() {
            while need_row[c] > 0 && need_col[s] > 0 {
                counts[c][s] += 1;
                need_row[c] -= 1;
                need_col[s] -= 1;
            }
        }
        counts[c][0] += need_row[c];
    }
    for (c, row) in counts.iter_mut().enumerate() {
        if class_sizes[c] < 3 {
            continue;
        }
        for s in 0..3 {
            if row[s] == 0 {
                let donor = (0..3).max_by_key(|&t| (row[t], 3 - t)).expect("three splits");
                row[donor] -= 1;
                row[s] += 1;
            }
        }
    }
    counts
}

/// Stratified row assignment: every class is shuffled with the split seed
/// and cut according to its share of each split.
pub fn stratified_indices(labels: &[usize], n_classes: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let present = by_class.iter().filter(|v| !v.is_empty()).count();
    if labels.len() < 3 * present.max(1) {
        return Err(DataError::TooSmall(format!(
            "{} rows for {present} classes (need at least 3 per class)",
            labels.len()
        )));
    }
    for (c, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < 3 {
            warn!("class {c} has only {} samples; some splits will miss it", rows.len());
        }
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = allocate(&sizes, &spec.fractions());

    let mut rng = seeded(spec.seed, Stream::Split);
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (rows, cnt) in by_class.iter_mut().zip(&counts) {
        rows.shuffle(&mut rng);
        let (a, rest) = rows.split_at(cnt[0]);
        let (b, c) = rest.split_at(cnt[1]);
        out.train.extend_from_slice(a);
        out.val.extend_from_slice(b);
        out.test.extend_from_slice(c);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Train/validation/test split preserving class proportions.
pub fn stratified_split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let idx = stratified_indices(&d.labels, d.n_classes(), spec)?;
    Ok((d.select_rows(&idx.train), d.select_rows(&idx.val), d.select_rows(&idx.test)))
}
