use serde::{Deserialize, Serialize};

use super::{dispersion_cost, FeatureGraph, OrderingError, Permutation, Result};

/// How local orders are merged into one global order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// Every local order ranks all `m` features; merge by weighted Borda.
    Borda,
    /// Local orders partition the features; concatenate cluster blocks.
    Blocks,
}

/// Scores are compared after rounding to this resolution so that weighted
/// sums that are equal in exact arithmetic tie.
const SCORE_QUANTUM: f64 = 1e-9;

fn quantize(x: f64) -> i64 {
    (x / SCORE_QUANTUM).round() as i64
}

/// Weighted Borda score of every feature: sum over clusters of
/// `alpha_c * rank_c(feature)`, ranks counted from 0.
pub fn borda_scores(locals: &[Permutation], weights: &[f64], m: usize) -> Result<Vec<f64>> {
    if locals.len() != weights.len() {
        return Err(OrderingError::WeightMismatch {
            orders: locals.len(),
            weights: weights.len(),
        });
    }
    let mut scores = vec![0.0; m];
    for (p, &alpha) in locals.iter().zip(weights) {
        p.check_bijective(m)?;
        for (rank, &f) in p.order().iter().enumerate() {
            scores[f] += alpha * rank as f64;
        }
    }
    Ok(scores)
}

/// Merges per-cluster orders into one permutation of `0..m`.
///
/// In `Borda` mode the result sorts features by ascending weighted Borda
/// score (ties by index) and carries the weighted footrule distance to the
/// local orders as its cost. In `Blocks` mode each cluster's features stay
/// contiguous in their local order, blocks are sorted by descending weight
/// (ties by smallest member), uncovered features trail in index order, and
/// the cost is `sum_c alpha_c * cost(pi_c)`.
pub fn global_combine(locals: &[Permutation], weights: &[f64], mode: CombineMode, m: usize) -> Result<Permutation> {
    if locals.len() != weights.len() {
        return Err(OrderingError::WeightMismatch {
            orders: locals.len(),
            weights: weights.len(),
        });
    }
    let out = match mode {
        CombineMode::Borda => {
            let scores = borda_scores(locals, weights, m)?;
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by_key(|&f| (quantize(scores[f]), f));
            let p = Permutation::global(order);
            let cost = weighted_footrule(&p, locals, weights)?;
            p.with_cost(cost)
        }
        CombineMode::Blocks => {
            let mut covered = vec![false; m];
            for p in locals {
                for &f in p.order() {
                    if f >= m || covered[f] {
                        return Err(OrderingError::NotBijective(format!("feature {f} repeated or out of range")));
                    }
                    covered[f] = true;
                }
            }
            let mut blocks: Vec<usize> = (0..locals.len()).filter(|&c| !locals[c].is_empty()).collect();
            let min_member = |c: usize| locals[c].order().iter().copied().min().unwrap_or(usize::MAX);
            blocks.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(min_member(a).cmp(&min_member(b))));
            let mut order: Vec<usize> = blocks.iter().flat_map(|&c| locals[c].order().iter().copied()).collect();
            order.extend((0..m).filter(|&f| !covered[f]));
            let mut cost = 0.0;
            for (p, &alpha) in locals.iter().zip(weights) {
                let c = p.cost().ok_or_else(|| OrderingError::BadGraph("local order carries no cost".into()))?;
                cost += alpha * c;
            }
            Permutation::global(order).with_cost(cost)
        }
    };
    out.check_bijective(m)?;
    Ok(out)
}

/// `sum_c alpha_c * sum_f |pos_global(f) - pos_c(f)|`.
pub fn weighted_footrule(global: &Permutation, locals: &[Permutation], weights: &[f64]) -> Result<f64> {
    let m = global.len();
    global.check_bijective(m)?;
    let mut gpos = vec![0usize; m];
    for (p, &f) in global.order().iter().enumerate() {
        gpos[f] = p;
    }
    let mut total = 0.0;
    for (local, &alpha) in locals.iter().zip(weights) {
        local.check_bijective(m)?;
        let d: usize = local.order().iter().enumerate().map(|(p, &f)| p.abs_diff(gpos[f])).sum();
        total += alpha * d as f64;
    }
    Ok(total)
}

/// Restriction of a global order to one graph's vertices.
pub fn induced_order(global: &Permutation, g: &FeatureGraph) -> Permutation {
    Permutation::global(
        global
            .order()
            .iter()
            .copied()
            .filter(|f| g.vertices().binary_search(f).is_ok())
            .collect(),
    )
}

/// Global dispersion cost of any arrangement: each cluster graph is scored
/// on the relative order its features take in `global`.
pub fn global_dispersion(global: &Permutation, graphs: &[FeatureGraph], weights: &[f64]) -> Result<f64> {
    if graphs.len() != weights.len() {
        return Err(OrderingError::WeightMismatch {
            orders: graphs.len(),
            weights: weights.len(),
        });
    }
    let mut total = 0.0;
    for (g, &alpha) in graphs.iter().zip(weights) {
        total += alpha * dispersion_cost(g, &induced_order(global, g))?;
    }
    Ok(total)
}
