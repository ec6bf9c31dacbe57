//! Epsilon-insensitive support vector regression solved in the dual by
//! sequential minimal optimization with second-order working-set selection.

use serde::{Deserialize, Serialize};

use crate::data::{check_finite, check_xy, Standardizer};
use crate::error::{LearnError, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma * |a - b|^2)`; `None` picks `1 / (k * var(X))` on the
    /// standardized inputs.
    Rbf { gamma: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            kernel: Kernel::Rbf { gamma: None },
            c: 1.0,
            epsilon: 0.05,
            tol: 1e-3,
        }
    }
}

impl SvrConfig {
    pub fn linear() -> Self {
        SvrConfig {
            kernel: Kernel::Linear,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ResolvedKernel {
    Linear,
    Rbf { gamma: f64 },
}

impl ResolvedKernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            ResolvedKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            ResolvedKernel::Rbf { gamma } => {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                (-gamma * d).exp()
            }
        }
    }
}

/// A trained regressor. Inputs are standardized before the kernel is
/// applied; support vectors are stored in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    kernel: ResolvedKernel,
    pub c: f64,
    pub epsilon: f64,
    pub standardizer: Standardizer,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i - alpha*_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    /// Collapsed primal weights, linear kernel only.
    pub weights: Option<Vec<f64>>,
    pub iterations: usize,
}

impl SvrModel {
    pub fn gamma(&self) -> Option<f64> {
        match self.kernel {
            ResolvedKernel::Rbf { gamma } => Some(gamma),
            ResolvedKernel::Linear => None,
        }
    }

    pub fn width(&self) -> usize {
        self.standardizer.width()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.transform_row(x);
        match &self.weights {
            Some(w) => w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + self.bias,
            None => self.predict_dual_std(&z),
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Kernel expansion over the support vectors, bypassing collapsed weights.
    pub fn predict_dual(&self, x: &[f64]) -> f64 {
        self.predict_dual_std(&self.standardizer.transform_row(x))
    }

    fn predict_dual_std(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * self.kernel.eval(sv, z))
            .sum::<f64>()
            + self.bias
    }

    /// Weights and intercept in the original input units (linear kernel).
    pub fn raw_linear(&self) -> Option<(Vec<f64>, f64)> {
        let w = self.weights.as_ref()?;
        let s = &self.standardizer;
        let raw: Vec<f64> = w.iter().zip(&s.scale).map(|(w, sc)| w / sc).collect();
        let b = self.bias - raw.iter().zip(&s.mean).map(|(w, m)| w * m).sum::<f64>();
        Some((raw, b))
    }
}

/// Fits an epsilon-SVR. Labels are used as given (centre them beforehand).
pub fn train_svr(x: &[Vec<f64>], y: &[f64], cfg: &SvrConfig) -> Result<SvrModel> {
    let k = check_xy(x, y)?;
    check_finite(y)?;
    if x.len() < 2 {
        return Err(LearnError::Shape("SVR needs at least 2 rows".into()));
    }
    if !(cfg.c > 0.0 && cfg.epsilon >= 0.0 && cfg.tol > 0.0) {
        return Err(LearnError::Range(format!(
            "C {} / epsilon {} / tol {}",
            cfg.c, cfg.epsilon, cfg.tol
        )));
    }
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.transform(x);
    let kernel = match cfg.kernel {
        Kernel::Linear => ResolvedKernel::Linear,
        Kernel::Rbf { gamma: Some(g) } if g > 0.0 => ResolvedKernel::Rbf { gamma: g },
        Kernel::Rbf { gamma: Some(g) } => {
            return Err(LearnError::Range(format!("gamma {g}")));
        }
        Kernel::Rbf { gamma: None } => {
            let all: Vec<f64> = z.iter().flatten().copied().collect();
            let m = all.iter().sum::<f64>() / all.len() as f64;
            let var = all.iter().map(|v| (v - m).powi(2)).sum::<f64>() / all.len() as f64;
            ResolvedKernel::Rbf {
                gamma: if var > 0.0 { 1.0 / (k as f64 * var) } else { 1.0 },
            }
        }
    };
    let n = z.len();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel.eval(&z[i], &z[j])).collect())
        .collect();
    let (beta, bias, iterations) = solve(&gram, y, cfg)?;

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            support_vectors.push(z[i].clone());
            dual_coef.push(b);
        }
    }
    let weights = matches!(kernel, ResolvedKernel::Linear).then(|| {
        let mut w = vec![0.0; k];
        for (sv, a) in support_vectors.iter().zip(&dual_coef) {
            for (wj, v) in w.iter_mut().zip(sv) {
                *wj += a * v;
            }
        }
        w
    });
    Ok(SvrModel {
        kernel,
        c: cfg.c,
        epsilon: cfg.epsilon,
        standardizer,
        support_vectors,
        dual_coef,
        bias,
        weights,
        iterations,
    })
}

/// Solves `min ½ aᵀQa + pᵀa` s.t. `sᵀa = 0`, `0 ≤ a ≤ C` over the 2n
/// variables `(alpha, alpha*)` with signs `s = (+1…, −1…)`. Returns the
/// per-sample coefficients `alpha − alpha*`, the bias and the iteration count.
fn solve(gram: &[Vec<f64>], y: &[f64], cfg: &SvrConfig) -> Result<(Vec<f64>, f64, usize)> {
    let n = y.len();
    let l = 2 * n;
    let c = cfg.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let idx = |t: usize| if t < n { t } else { t - n };
    // Q_st = s_s s_t K(idx s, idx t)
    let q = |s: usize, t: usize| sign(s) * sign(t) * gram[idx(s)][idx(t)];
    let qd: Vec<f64> = (0..l).map(|t| gram[idx(t)][idx(t)]).collect();

    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { cfg.epsilon - y[t] } else { cfg.epsilon + y[t - n] })
        .collect();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let max_iter = 10_000_000usize.max(100 * l);
    let mut iter = 0;
    loop {
        // working set: i maximises −s_t G_t over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            let up = if sign(t) > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if up && -sign(t) * grad[t] >= gmax {
                gmax = -sign(t) * grad[t];
                i = t;
            }
        }
        // j minimises the second-order objective decrease over I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..l {
            let low = if sign(t) > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !low {
                continue;
            }
            let v = sign(t) * grad[t];
            gmax2 = gmax2.max(v);
            if i == usize::MAX {
                continue;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let a = qd[i] + qd[t] - 2.0 * gram[idx(i)][idx(t)];
                let obj = -(diff * diff) / if a > 0.0 { a } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < cfg.tol {
            break;
        }
        if iter >= max_iter {
            return Err(LearnError::NoConvergence(max_iter));
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..l {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if upper(alpha[t]) {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let beta = (0..n).map(|t| alpha[t] - alpha[t + n]).collect();
    Ok((beta, -rho, iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let y = x.iter().map(|r| 2.0 * r[0]).collect();
        (x, y)
    }

    #[test]
    fn planted_line() {
        let (x, y) = line_data(60, 1);
        let cfg = SvrConfig {
            epsilon: 0.01,
            ..SvrConfig::linear()
        };
        let m = train_svr(&x, &y, &cfg).unwrap();
        let (w, _) = m.raw_linear().unwrap();
        assert!((w[0] - 2.0).abs() <= 0.02, "{}", w[0]);
        let mse = crate::data::mse(&m.predict(&x), &y);
        assert!(mse <= 0.01f64.powi(2), "{mse}");
    }

    #[test]
    fn constant_target() {
        let (x, _) = line_data(30, 2);
        let y = vec![0.3; 30];
        let cfg = SvrConfig {
            epsilon: 0.01,
            ..SvrConfig::linear()
        };
        let m = train_svr(&x, &y, &cfg).unwrap();
        let (w, b) = m.raw_linear().unwrap();
        assert!(w[0].abs() < 1e-9, "{}", w[0]);
        assert!((b - 0.3).abs() <= 0.01, "{b}");
    }

    #[test]
    fn rbf_sine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).sin()).collect();
        let cfg = SvrConfig {
            c: 10.0,
            ..SvrConfig::default()
        };
        let m = train_svr(&x, &y, &cfg).unwrap();
        let mse = crate::data::mse(&m.predict(&x), &y);
        assert!(mse < 0.01, "{mse}");
    }

    #[test]
    fn dual_coefficients_bounded_and_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] - r[1] * r[2] + rng.gen_range(-0.3..0.3)).collect();
        let m = train_svr(&x, &y, &SvrConfig::default()).unwrap();
        assert!(m.dual_coef.iter().all(|a| a.abs() <= m.c + 1e-12));
        assert!(m.dual_coef.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn collapsed_weights_match_dual_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..3.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] - 0.5 * r[3] + rng.gen_range(-0.1..0.1)).collect();
        let m = train_svr(&x, &y, &SvrConfig::linear()).unwrap();
        for r in &x {
            assert!((m.predict_row(r) - m.predict_dual(r)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![1.0], vec![f64::INFINITY]];
        assert!(matches!(
            train_svr(&x, &[0.0, 1.0], &SvrConfig::default()),
            Err(LearnError::NonFinite)
        ));
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_svr(&x, &[0.0, f64::NAN], &SvrConfig::default()),
            Err(LearnError::NonFinite)
        ));
        let bad = SvrConfig {
            c: 0.0,
            ..SvrConfig::default()
        };
        assert!(matches!(train_svr(&x, &[0.0, 1.0], &bad), Err(LearnError::Range(_))));
    }

    #[test]
    fn deterministic() {
        let (x, y) = line_data(40, 6);
        let a = train_svr(&x, &y, &SvrConfig::default()).unwrap();
        let b = train_svr(&x, &y, &SvrConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
