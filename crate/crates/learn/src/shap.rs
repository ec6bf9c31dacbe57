//! Model-agnostic Shapley attributions (KernelSHAP) and their summaries.

use std::fmt::Write as _;

use memorability_core::spearman;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::check_x;
use crate::error::{LearnError, Result};

/// Widths up to this size are solved over every coalition.
pub const EXACT_MAX_FEATURES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub phi: Vec<f64>,
    /// Mean model output over the background.
    pub base_value: f64,
    /// Model output at the explained instance.
    pub fx: f64,
}

impl ShapExplanation {
    /// `base_value + Σ phi − fx`; zero up to rounding.
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.fx
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of a coalition of size `s` out of `k`.
pub fn kernel_weight(k: usize, s: usize) -> f64 {
    (k - 1) as f64 / (binom(k, s) * s as f64 * (k - s) as f64)
}

/// Expected output when the features in `mask` come from `x` and the rest
/// from each background row in turn.
fn coalition_value<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], bg: &[Vec<f64>], mask: &[bool]) -> f64 {
    let mut z = vec![0.0; x.len()];
    let mut total = 0.0;
    for row in bg {
        for i in 0..x.len() {
            z[i] = if mask[i] { x[i] } else { row[i] };
        }
        total += f(&z);
    }
    total / bg.len() as f64
}

fn values_parallel<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    x: &[f64],
    bg: &[Vec<f64>],
    masks: &[Vec<bool>],
) -> Vec<f64> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(masks.len().max(1));
    let chunk = masks.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = masks
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|m| coalition_value(f, x, bg, m)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("coalition worker panicked"))
            .collect()
    })
}

/// All proper non-empty coalitions with their kernel weights.
fn enumerate(k: usize) -> (Vec<Vec<bool>>, Vec<f64>) {
    let mut masks = Vec::new();
    let mut weights = Vec::new();
    for bits in 1u32..(1u32 << k) - 1 {
        let mask: Vec<bool> = (0..k).map(|i| bits >> i & 1 == 1).collect();
        weights.push(kernel_weight(k, bits.count_ones() as usize));
        masks.push(mask);
    }
    (masks, weights)
}

/// Coalitions drawn in complementary pairs with sizes following the
/// kernel, so each carries unit weight.
fn sample_coalitions(k: usize, n: usize, seed: u64) -> (Vec<Vec<bool>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size_w: Vec<f64> = (1..k).map(|s| 1.0 / (s * (k - s)) as f64).collect();
    let total: f64 = size_w.iter().sum();
    let pairs = (n / 2).max(1);
    let mut masks = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let mut u = rng.gen::<f64>() * total;
        let mut s = k - 1;
        for (i, w) in size_w.iter().enumerate() {
            if u < *w {
                s = i + 1;
                break;
            }
            u -= w;
        }
        let mut mask = vec![false; k];
        for i in sample(&mut rng, k, s) {
            mask[i] = true;
        }
        let comp: Vec<bool> = mask.iter().map(|b| !b).collect();
        masks.push(mask);
        masks.push(comp);
    }
    let weights = vec![1.0; masks.len()];
    (masks, weights)
}

/// KernelSHAP with the efficiency constraint imposed exactly by
/// eliminating the last attribution. Widths up to [`EXACT_MAX_FEATURES`]
/// use every coalition and ignore `n_coalitions`.
pub fn kernel_shap<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    x: &[f64],
    background: &[Vec<f64>],
    n_coalitions: usize,
    seed: u64,
) -> Result<ShapExplanation> {
    let k = x.len();
    if k == 0 {
        return Err(LearnError::Shape("no features to explain".into()));
    }
    if check_x(background)? != k {
        return Err(LearnError::Shape(format!(
            "background width {} for an instance of width {k}",
            background[0].len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    let base_value = background.iter().map(|r| f(r)).sum::<f64>() / background.len() as f64;
    let fx = f(x);
    if !(base_value.is_finite() && fx.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    let total = fx - base_value;
    if k == 1 {
        return Ok(ShapExplanation {
            phi: vec![total],
            base_value,
            fx,
        });
    }
    let (masks, weights) = if k <= EXACT_MAX_FEATURES {
        enumerate(k)
    } else {
        sample_coalitions(k, n_coalitions, seed)
    };
    let values = values_parallel(f, x, background, &masks);

    // v(S) − base − z_last·total = Σ_{i<last} (z_i − z_last) phi_i
    let last = k - 1;
    let m = last;
    let mut ata = DMatrix::<f64>::zeros(m, m);
    let mut atb = DVector::<f64>::zeros(m);
    let mut row = vec![0.0; m];
    for ((mask, w), v) in masks.iter().zip(&weights).zip(&values) {
        let zl = f64::from(u8::from(mask[last]));
        for i in 0..m {
            row[i] = f64::from(u8::from(mask[i])) - zl;
        }
        let t = v - base_value - zl * total;
        for i in 0..m {
            if row[i] == 0.0 {
                continue;
            }
            atb[i] += w * row[i] * t;
            for j in 0..m {
                ata[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    let chol = ata.cholesky().ok_or(LearnError::Singular)?;
    let sol = chol.solve(&atb);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::Singular);
    }
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    phi.push(total - phi.iter().sum::<f64>());
    Ok(ShapExplanation {
        phi,
        base_value,
        fx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub index: usize,
    pub mean_abs_phi: f64,
    /// Spearman rho between feature value and phi; `None` when undefined.
    pub direction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    /// Decreasing mean |phi|.
    pub ranking: Vec<FeatureImportance>,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub phis: Vec<Vec<f64>>,
}

impl ShapSummary {
    /// Long-format scatter data: `feature,sample_index,feature_value,phi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,sample_index,feature_value,phi\n");
        for (j, name) in self.names.iter().enumerate() {
            for (s, (vals, phis)) in self.values.iter().zip(&self.phis).enumerate() {
                let _ = writeln!(out, "{name},{s},{},{}", vals[j], phis[j]);
            }
        }
        out
    }

    pub fn ranking_csv(&self) -> String {
        let mut out = String::from("rank,feature,mean_abs_phi,direction\n");
        for (r, f) in self.ranking.iter().enumerate() {
            let dir = f.direction.map_or(String::new(), |d| d.to_string());
            let _ = writeln!(out, "{},{},{},{dir}", r + 1, f.name, f.mean_abs_phi);
        }
        out
    }
}

/// Ranks features by mean |phi| and measures whether larger feature values
/// push the prediction up or down.
pub fn shap_summary(
    explanations: &[ShapExplanation],
    feature_values: &[Vec<f64>],
    names: &[String],
) -> Result<ShapSummary> {
    if explanations.is_empty() {
        return Err(LearnError::InconsistentFeatures("no explanations".into()));
    }
    let k = names.len();
    if explanations.len() != feature_values.len() {
        return Err(LearnError::InconsistentFeatures(format!(
            "{} explanations for {} instances",
            explanations.len(),
            feature_values.len()
        )));
    }
    for (e, v) in explanations.iter().zip(feature_values) {
        if e.phi.len() != k || v.len() != k {
            return Err(LearnError::InconsistentFeatures(format!(
                "expected {k} features, got phi {} / values {}",
                e.phi.len(),
                v.len()
            )));
        }
    }
    let n = explanations.len() as f64;
    let mut ranking: Vec<FeatureImportance> = (0..k)
        .map(|j| {
            let phi: Vec<f64> = explanations.iter().map(|e| e.phi[j]).collect();
            let vals: Vec<f64> = feature_values.iter().map(|v| v[j]).collect();
            FeatureImportance {
                name: names[j].clone(),
                index: j,
                mean_abs_phi: phi.iter().map(|p| p.abs()).sum::<f64>() / n,
                direction: spearman(&vals, &phi).ok().map(|r| r.rho),
            }
        })
        .collect();
    ranking.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi).then(a.index.cmp(&b.index)));
    Ok(ShapSummary {
        ranking,
        names: names.to_vec(),
        values: feature_values.to_vec(),
        phis: explanations.iter().map(|e| e.phi.clone()).collect(),
    })
}
