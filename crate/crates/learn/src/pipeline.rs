//! Model choice, the train-time pipeline (label centring, selection,
//! augmentation, fit) and k-fold evaluation.

use std::fmt::Write as _;

use memorability_core::{spearman, CoreError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{check_finite, check_xy, mse, project, LabelNormalizer};
use crate::error::{LearnError, Result};
use crate::mlp::{train_mlp, MlpConfig, MlpModel};
use crate::select::select_top_k;
use crate::svr::{train_svr, SvrConfig, SvrModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Svr(SvrConfig),
    Mlp(MlpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Svr(SvrModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<Model> {
        Ok(match spec {
            ModelSpec::Svr(cfg) => Model::Svr(train_svr(x, y, cfg)?),
            ModelSpec::Mlp(cfg) => Model::Mlp(train_mlp(x, y, cfg, None)?),
        })
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Model::Svr(m) => m.predict_row(x),
            Model::Mlp(m) => m.predict_row(x),
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Produces extra training rows from augmented copies of a source row.
pub trait Augmenter: Sync {
    fn augment(&self, row: usize) -> Result<Vec<Vec<f64>>>;
}

/// Augmented feature rows computed ahead of time, indexed by source row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecomputedAugmenter {
    pub rows: Vec<Vec<Vec<f64>>>,
}

impl Augmenter for PrecomputedAugmenter {
    fn augment(&self, row: usize) -> Result<Vec<Vec<f64>>> {
        Ok(self.rows.get(row).cloned().unwrap_or_default())
    }
}

/// A fitted model with everything needed to score a full-width feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub feature_names: Vec<String>,
    pub selected: Vec<usize>,
    pub labels: LabelNormalizer,
    pub model: Model,
}

impl TrainedPipeline {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let sub: Vec<f64> = self.selected.iter().map(|&j| x[j]).collect();
        self.labels.denormalize(self.model.predict_row(&sub))
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn selected_names(&self) -> Vec<String> {
        self.selected
            .iter()
            .map(|&j| self.feature_names.get(j).cloned().unwrap_or_else(|| format!("f{j}")))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fits on the listed rows only. Returns the pipeline and the source row of
/// every training example, augmented copies included.
pub fn fit_pipeline(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    spec: &ModelSpec,
    k_select: Option<usize>,
    augmenter: Option<&dyn Augmenter>,
) -> Result<(TrainedPipeline, Vec<usize>)> {
    let width = check_xy(x, y)?;
    check_finite(y)?;
    let tx: Vec<Vec<f64>> = rows.iter().map(|&i| x[i].clone()).collect();
    let ty: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let labels = LabelNormalizer::fit(&ty)?;
    let selected = match k_select {
        Some(k) => select_top_k(&tx, &ty, k)?,
        None => (0..width).collect(),
    };
    let mut fx = tx;
    let mut fy = ty;
    let mut sources = rows.to_vec();
    if let Some(aug) = augmenter {
        for &i in rows {
            for extra in aug.augment(i)? {
                if extra.len() != width {
                    return Err(LearnError::Shape(format!(
                        "augmented row of width {} for {width} features",
                        extra.len()
                    )));
                }
                fx.push(extra);
                fy.push(y[i]);
                sources.push(i);
            }
        }
    }
    let model = Model::fit(spec, &project(&fx, &selected), &labels.normalize(&fy))?;
    Ok((
        TrainedPipeline {
            feature_names: Vec::new(),
            selected,
            labels,
            model,
        },
        sources,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub model: ModelSpec,
    pub k_select: Option<usize>,
    pub folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub spearman: f64,
    /// Predictions were constant, so rho was undefined and recorded as 0.
    pub degenerate: bool,
    pub mse: f64,
    pub n_train: usize,
    pub n_validation: usize,
    pub selected: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub predictions: Vec<f64>,
    pub training_sources: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: Vec<FoldResult>,
    /// Average of the per-fold rhos.
    pub mean_spearman: f64,
    pub mean_mse: f64,
    /// Population standard deviation of the per-fold MSEs.
    pub mse_std: f64,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,spearman,mse,mse_std,n_train,n_validation\n");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{},{},{},,{},{}",
                f.fold, f.spearman, f.mse, f.n_train, f.n_validation
            );
        }
        let _ = writeln!(
            out,
            "mean,{},{},{},,",
            self.mean_spearman, self.mean_mse, self.mse_std
        );
        out
    }
}

/// Shuffled contiguous folds; the first `n % folds` folds get one extra row.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = n / folds + usize::from(f < n % folds);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    out
}

/// K-fold evaluation. Every step that learns from data (label mean,
/// selection, augmentation, model) sees the training folds only.
pub fn kfold_evaluate(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &EvalConfig,
    augmenter: Option<&dyn Augmenter>,
) -> Result<EvalReport> {
    check_xy(x, y)?;
    check_finite(y)?;
    let n = x.len();
    if cfg.folds < 2 || n < cfg.folds || n / cfg.folds < 2 {
        return Err(LearnError::FoldTooSmall {
            n,
            folds: cfg.folds,
        });
    }
    let assignment = fold_assignment(n, cfg.folds, cfg.seed);
    let results: Vec<Result<FoldResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = assignment
            .iter()
            .enumerate()
            .map(|(f, val)| {
                let assignment = &assignment;
                scope.spawn(move || {
                    let train: Vec<usize> = assignment
                        .iter()
                        .enumerate()
                        .filter(|(g, _)| *g != f)
                        .flat_map(|(_, rows)| rows.iter().copied())
                        .collect();
                    let (pipe, sources) =
                        fit_pipeline(x, y, &train, &cfg.model, cfg.k_select, augmenter)?;
                    let vx: Vec<Vec<f64>> = val.iter().map(|&i| x[i].clone()).collect();
                    let vy: Vec<f64> = val.iter().map(|&i| y[i]).collect();
                    let pred = pipe.predict(&vx);
                    check_finite(&pred)?;
                    let (rho, degenerate) = match spearman(&pred, &vy) {
                        Ok(r) => (r.rho, false),
                        Err(CoreError::Degenerate(_)) => (0.0, true),
                        Err(e) => return Err(e.into()),
                    };
                    Ok(FoldResult {
                        fold: f,
                        spearman: rho,
                        degenerate,
                        mse: mse(&pred, &vy),
                        n_train: sources.len(),
                        n_validation: val.len(),
                        selected: pipe.selected,
                        validation_rows: val.clone(),
                        predictions: pred,
                        training_sources: sources,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fold worker panicked")).collect()
    });
    let folds: Vec<FoldResult> = results.into_iter().collect::<Result<_>>()?;
    let k = folds.len() as f64;
    let mean_spearman = folds.iter().map(|f| f.spearman).sum::<f64>() / k;
    let mean_mse = folds.iter().map(|f| f.mse).sum::<f64>() / k;
    let mse_std = (folds.iter().map(|f| (f.mse - mean_mse).powi(2)).sum::<f64>() / k).sqrt();
    Ok(EvalReport {
        folds,
        mean_spearman,
        mean_mse,
        mse_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_rows() {
        let a = fold_assignment(23, 10, 4);
        assert_eq!(a.len(), 10);
        let mut all: Vec<usize> = a.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(a[0].len(), 3);
        assert_eq!(a[9].len(), 2);
    }

    #[test]
    fn too_few_rows() {
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let cfg = EvalConfig {
            model: ModelSpec::Svr(SvrConfig::linear()),
            k_select: None,
            folds: 10,
            seed: 0,
        };
        assert!(matches!(
            kfold_evaluate(&x, &y, &cfg, None),
            Err(LearnError::FoldTooSmall { n: 9, folds: 10 })
        ));
    }

    #[test]
    fn csv_layout() {
        let r = EvalReport {
            folds: vec![],
            mean_spearman: 0.5,
            mean_mse: 0.1,
            mse_std: 0.01,
        };
        assert_eq!(
            r.to_csv(),
            "fold,spearman,mse,mse_std,n_train,n_validation\nmean,0.5,0.1,0.01,,\n"
        );
    }
}
