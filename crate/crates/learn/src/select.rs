//! Relevance-ranked feature selection.

use memorability_core::{spearman, CoreError};

use crate::data::{check_xy, column};
use crate::error::{LearnError, Result};

/// |Spearman rho| of every column against `y`; constant columns score 0.
pub fn relevance(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let k = check_xy(x, y)?;
    (0..k)
        .map(|j| match spearman(&column(x, j), y) {
            Ok(r) => Ok(r.rho.abs()),
            Err(CoreError::Degenerate(_)) => Ok(0.0),
            Err(e) => Err(e.into()),
        })
        .collect()
}

/// Indices of the `k` most relevant columns, ascending. Ties go to the
/// lower index.
pub fn select_top_k(x: &[Vec<f64>], y: &[f64], k: usize) -> Result<Vec<usize>> {
    let width = x.first().map_or(0, Vec::len);
    if k == 0 || k > width {
        return Err(LearnError::Range(format!("k = {k} for {width} features")));
    }
    let rel = relevance(x, y)?;
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| rel[b].total_cmp(&rel[a]).then(a.cmp(&b)));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}
