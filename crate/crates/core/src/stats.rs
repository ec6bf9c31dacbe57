//! Rank statistics and small least-squares fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Spearman correlation together with the number of pairs it was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub n: usize,
}

/// 1-based ranks with ties sharing the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean((i+1)..=j)
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CoreError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(CoreError::InsufficientData(format!(
            "correlation needs at least 2 pairs, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(CoreError::Degenerate("zero variance".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<RankCorrelation> {
    if a.len() != b.len() {
        return Err(CoreError::LengthMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(CoreError::Validation("non-finite value in correlation input".into()));
    }
    let rho = pearson(&average_ranks(a), &average_ranks(b))?;
    Ok(RankCorrelation { rho, n: a.len() })
}

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r2: f64,
    pub residual_variance: f64,
}

/// Least squares of `y` on the columns of `design` (rows are observations).
/// A rank-deficient design yields [`CoreError::Singular`].
pub fn ols(design: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = design.len();
    if n != y.len() {
        return Err(CoreError::LengthMismatch(n, y.len()));
    }
    let p = design.first().map_or(0, Vec::len);
    if n < p || p == 0 {
        return Err(CoreError::InsufficientData(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let x = DMatrix::from_fn(n, p, |i, j| design[i][j]);
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (n.max(p) as f64) * f64::EPSILON * 16.0;
    if smax == 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(CoreError::Singular);
    }
    let beta = svd.solve(&yv, tol).map_err(|_| CoreError::Singular)?;
    let fitted = &x * &beta;
    let resid = &yv - fitted;
    let ss_res = resid.norm_squared();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let dof = n.saturating_sub(p);
    let residual_variance = if dof > 0 { ss_res / dof as f64 } else { 0.0 };
    let xtx_inv = (x.transpose() * &x)
        .try_inverse()
        .ok_or(CoreError::Singular)?;
    let std_errors = (0..p)
        .map(|j| (residual_variance * xtx_inv[(j, j)]).max(0.0).sqrt())
        .collect();
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        r2,
        residual_variance,
    })
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}
