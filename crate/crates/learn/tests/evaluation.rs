use memorability_core::spearman;
use memorability_learn::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn planted_linear(n: usize, k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let y = x.iter().map(|r| 0.5 + 0.1 * r[0] - 0.05 * r[1] + 0.02 * r[2]).collect();
    (x, y)
}

fn linear_cfg(seed: u64) -> EvalConfig {
    EvalConfig {
        model: ModelSpec::Svr(SvrConfig {
            epsilon: 0.001,
            c: 10.0,
            ..SvrConfig::linear()
        }),
        k_select: None,
        folds: 10,
        seed,
    }
}

#[test]
fn noiseless_linear_target_is_recovered() {
    let (x, y) = planted_linear(200, 5, 1);
    let r = kfold_evaluate(&x, &y, &linear_cfg(0), None).unwrap();
    assert_eq!(r.folds.len(), 10);
    assert!(r.mean_spearman >= 0.99, "{}", r.mean_spearman);
    assert!(r.mean_mse <= 1e-4, "{}", r.mean_mse);
}

#[test]
fn shuffled_labels_carry_no_signal() {
    let (x, mut y) = planted_linear(200, 5, 2);
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let cfg = EvalConfig {
        model: ModelSpec::Svr(SvrConfig::default()),
        ..linear_cfg(4)
    };
    let r = kfold_evaluate(&x, &y, &cfg, None).unwrap();
    assert!(r.mean_spearman.abs() < 0.2, "{}", r.mean_spearman);
}

#[test]
fn label_offset_is_absorbed() {
    // labels on a 1/1024 grid so that adding the offset is exact in binary
    let (x, y) = planted_linear(120, 4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noisy: Vec<f64> = y
        .iter()
        .map(|v| ((v + rng.gen_range(-0.05..0.05)) * 1024.0).round() / 1024.0)
        .collect();
    let shifted: Vec<f64> = noisy.iter().map(|v| v + 0.75).collect();
    let cfg = EvalConfig {
        model: ModelSpec::Svr(SvrConfig::default()),
        k_select: Some(2),
        ..linear_cfg(7)
    };
    let a = kfold_evaluate(&x, &noisy, &cfg, None).unwrap();
    let b = kfold_evaluate(&x, &shifted, &cfg, None).unwrap();
    for (fa, fb) in a.folds.iter().zip(&b.folds) {
        assert_eq!(fa.selected, fb.selected);
        for (pa, pb) in fa.predictions.iter().zip(&fb.predictions) {
            assert!((pb - pa - 0.75).abs() <= 1e-12);
        }
        assert_eq!(fa.spearman, fb.spearman);
        assert!((fa.mse - fb.mse).abs() <= 1e-12, "{} vs {}", fa.mse, fb.mse);
    }
    assert_eq!(a.mean_spearman, b.mean_spearman);
}

#[test]
fn reported_rho_is_mean_of_per_fold_rhos() {
    let (x, y) = planted_linear(100, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let y: Vec<f64> = y.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
    let r = kfold_evaluate(&x, &y, &linear_cfg(1), None).unwrap();
    let mut sum = 0.0;
    for f in &r.folds {
        let truth: Vec<f64> = f.validation_rows.iter().map(|&i| y[i]).collect();
        sum += spearman(&f.predictions, &truth).unwrap().rho;
    }
    assert_eq!(sum / r.folds.len() as f64, r.mean_spearman);
}

struct Jitter {
    rows: Vec<Vec<f64>>,
}

impl Augmenter for Jitter {
    fn augment(&self, row: usize) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(row as u64);
        Ok((0..4)
            .map(|_| self.rows[row].iter().map(|v| v + rng.gen_range(-0.01..0.01)).collect())
            .collect())
    }
}

#[test]
fn augmented_rows_never_leak_into_validation() {
    let (x, y) = planted_linear(60, 3, 10);
    let aug = Jitter { rows: x.clone() };
    let r = kfold_evaluate(&x, &y, &linear_cfg(2), Some(&aug)).unwrap();
    let mut seen = vec![0usize; x.len()];
    for f in &r.folds {
        for &v in &f.validation_rows {
            seen[v] += 1;
            assert!(!f.training_sources.contains(&v), "row {v} leaked in fold {}", f.fold);
        }
        assert_eq!(f.n_train, 5 * (x.len() - f.n_validation));
    }
    assert!(seen.iter().all(|&c| c == 1));
}

#[test]
fn mlp_pipeline_runs_and_serializes() {
    let (x, y) = planted_linear(80, 3, 11);
    let cfg = EvalConfig {
        model: ModelSpec::Mlp(MlpConfig {
            epochs: 20,
            lr: 1e-3,
            ..Default::default()
        }),
        k_select: Some(2),
        folds: 5,
        seed: 0,
    };
    let r = kfold_evaluate(&x, &y, &cfg, None).unwrap();
    assert!(r.mean_mse.is_finite());
    let rows: Vec<usize> = (0..x.len()).collect();
    let (pipe, _) = fit_pipeline(&x, &y, &rows, &cfg.model, Some(2), None).unwrap();
    let back = TrainedPipeline::from_json(&pipe.to_json().unwrap()).unwrap();
    for r in &x {
        assert_eq!(pipe.predict_row(r), back.predict_row(r));
    }
}

#[test]
fn svr_checkpoint_round_trip() {
    let (x, y) = planted_linear(50, 4, 12);
    let rows: Vec<usize> = (0..x.len()).collect();
    let spec = ModelSpec::Svr(SvrConfig::default());
    let (pipe, _) = fit_pipeline(&x, &y, &rows, &spec, None, None).unwrap();
    let back = TrainedPipeline::from_json(&pipe.to_json().unwrap()).unwrap();
    assert_eq!(pipe, back);
}

/// 40 columns, the first 25 informative with weights in [0.5, 1.5].
pub fn planted_selection(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let w: Vec<f64> = (0..25).map(|_| rng.gen_range(0.5..1.5)).collect();
    let x: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..40).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| w.iter().zip(r).map(|(a, v)| a * v).sum::<f64>() + normal.sample(&mut rng))
        .collect();
    (x, y)
}

#[test]
fn top_25_recovers_planted_features() {
    let hits: Vec<usize> = (0..20)
        .map(|seed| {
            let (x, y) = planted_selection(seed);
            let chosen = select_top_k(&x, &y, 25).unwrap();
            chosen.iter().filter(|&&j| j < 25).count()
        })
        .collect();
    let mean = hits.iter().sum::<usize>() as f64 / hits.len() as f64;
    assert!(mean >= 22.0, "mean {mean} over seeds, per seed {hits:?}");
}
