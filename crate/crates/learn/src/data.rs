//! Row-major design matrices, input standardization and label centring.

use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};

/// Checks that `x` is a non-empty rectangular finite matrix matching `y`.
pub fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(LearnError::Shape(format!("{} rows, {} labels", x.len(), y.len())));
    }
    check_x(x)
}

/// Returns the width of a non-empty rectangular finite matrix.
pub fn check_x(x: &[Vec<f64>]) -> Result<usize> {
    let k = x.first().map_or(0, Vec::len);
    if x.is_empty() || k == 0 {
        return Err(LearnError::Shape("empty design matrix".into()));
    }
    for row in x {
        if row.len() != k {
            return Err(LearnError::Shape(format!("ragged rows: {} vs {k}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite);
        }
    }
    Ok(k)
}

pub fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LearnError::NonFinite)
    }
}

pub fn column(x: &[Vec<f64>], j: usize) -> Vec<f64> {
    x.iter().map(|r| r[j]).collect()
}

/// Keeps the listed columns, in the listed order.
pub fn project(x: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    x.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect()
}

/// Per-column z-scoring. Constant columns keep scale 1 and map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let k = check_x(x)?;
        let n = x.len() as f64;
        let mut mean = vec![0.0; k];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for row in x {
            for j in 0..k {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Subtracts the training-label mean.
///
/// The mean is held as an anchor label plus the mean offset from it, and
/// centring goes through the offsets, so shifting every label by a constant
/// that the float grid represents exactly leaves the centred labels
/// bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelNormalizer {
    pub mean: f64,
    anchor: f64,
    offset: f64,
}

impl LabelNormalizer {
    pub fn fit(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(LearnError::Shape("no labels".into()));
        }
        check_finite(y)?;
        let anchor = y[0];
        let offset = y.iter().map(|v| v - anchor).sum::<f64>() / y.len() as f64;
        Ok(LabelNormalizer {
            mean: anchor + offset,
            anchor,
            offset,
        })
    }

    pub fn normalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.anchor) - self.offset).collect()
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z + self.mean
    }
}

pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_zero_mean_unit_std() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 3.0, (i * i) as f64]).collect();
        let s = Standardizer::fit(&x).unwrap();
        let z = s.transform(&x);
        for j in 0..3 {
            let c = column(&z, j);
            let m = c.iter().sum::<f64>() / 20.0;
            assert!(m.abs() < 1e-12);
            if j != 1 {
                let sd = (c.iter().map(|v| v * v).sum::<f64>() / 20.0).sqrt();
                assert!((sd - 1.0).abs() < 1e-12);
            } else {
                assert!(c.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn centring_is_shift_stable_on_dyadic_labels() {
        let y = [0.125, 0.5, 0.375, 0.9375, 0.0625];
        let shifted: Vec<f64> = y.iter().map(|v| v + 3.25).collect();
        let a = LabelNormalizer::fit(&y).unwrap();
        let b = LabelNormalizer::fit(&shifted).unwrap();
        assert_eq!(a.normalize(&y), b.normalize(&shifted));
    }

    #[test]
    fn label_round_trip_on_dyadic_values() {
        let y = [0.25, 0.5, 0.75, 1.0];
        let n = LabelNormalizer::fit(&y).unwrap();
        assert_eq!(n.mean, 0.625);
        for (z, v) in n.normalize(&y).iter().zip(y) {
            assert_eq!(n.denormalize(*z), v);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(check_xy(&[vec![1.0]], &[1.0, 2.0]), Err(LearnError::Shape(_))));
        assert!(matches!(check_x(&[vec![1.0], vec![1.0, 2.0]]), Err(LearnError::Shape(_))));
        assert!(matches!(check_x(&[vec![f64::NAN]]), Err(LearnError::NonFinite)));
    }
}
