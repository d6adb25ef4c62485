use std::f64::consts::LN_10;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::gp::halton;

/// Diagonal jitter added to every covariance factorization.
pub const BASE_JITTER: f64 = 1e-10;
/// Largest jitter tried before the covariance is declared singular.
pub const MAX_JITTER: f64 = 1e-4;
/// Local searches run when maximizing the log marginal likelihood.
pub const LML_STARTS: usize = 8;
const STEP_TOLERANCE: f64 = 1e-6;
const MAX_LML_EVALS: usize = 4000;

// Log-space boxes: length scales [0.01, 10], signal variance [0.01, 10],
// noise variance [1e-10, 0.1].
const LN_LENGTH: (f64, f64) = (-2.0 * LN_10, LN_10);
const LN_SIGNAL: (f64, f64) = (-2.0 * LN_10, LN_10);
const LN_NOISE: (f64, f64) = (-10.0 * LN_10, -LN_10);

/// Squared-exponential ARD kernel hyperparameters, on standardized costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Hyperparameters {
    fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            length_scales: theta[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum();
        self.signal_variance * (-0.5 * r2).exp()
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    costs: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    hyper: Hyperparameters,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

struct Factor {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

fn factor(inputs: &[Vec<f64>], y: &DVector<f64>, h: &Hyperparameters, escalate: bool) -> Option<Factor> {
    let n = inputs.len();
    let k = DMatrix::from_fn(n, n, |i, j| h.kernel(&inputs[i], &inputs[j]));
    let mut jitter = BASE_JITTER;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += h.noise_variance + jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            let alpha = chol.solve(y);
            return Some(Factor { chol, alpha, jitter });
        }
        if !escalate || jitter >= MAX_JITTER {
            return None;
        }
        jitter = (jitter * 10.0).min(MAX_JITTER);
    }
}

fn log_marginal_likelihood(inputs: &[Vec<f64>], y: &DVector<f64>, theta: &[f64]) -> f64 {
    let h = Hyperparameters::from_log(theta);
    match factor(inputs, y, &h, false) {
        Some(f) => {
            let log_det: f64 = f.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
            let n = y.len() as f64;
            -0.5 * y.dot(&f.alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
        }
        None => f64::NEG_INFINITY,
    }
}

fn bounds(dim: usize) -> Vec<(f64, f64)> {
    let mut b = vec![LN_LENGTH; dim];
    b.push(LN_SIGNAL);
    b.push(LN_NOISE);
    b
}

/// Coordinate pattern search in log space, maximizing `f`.
fn pattern_search(f: &dyn Fn(&[f64]) -> f64, start: Vec<f64>, b: &[(f64, f64)]) -> (Vec<f64>, f64) {
    let mut theta = start;
    let mut best = f(&theta);
    let mut step = 1.0;
    let mut evals = 1;
    while step >= STEP_TOLERANCE && evals < MAX_LML_EVALS {
        let mut improved = false;
        for i in 0..theta.len() {
            for dir in [1.0, -1.0] {
                let mut trial = theta.clone();
                trial[i] = (trial[i] + dir * step).clamp(b[i].0, b[i].1);
                if trial[i] == theta[i] {
                    continue;
                }
                let v = f(&trial);
                evals += 1;
                if v > best {
                    best = v;
                    theta = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (theta, best)
}

impl GpModel {
    /// Fit length scales and signal variance by multi-start maximization
    /// of the log marginal likelihood, treating the costs as noise-free
    /// (only the diagonal jitter regularizes the covariance).
    pub fn fit(inputs: &[Vec<f64>], costs: &[f64]) -> Result<Self, ModelError> {
        Self::fit_impl(inputs, costs, false)
    }

    /// As [`GpModel::fit`], with the noise variance fitted as well.
    pub fn fit_noisy(inputs: &[Vec<f64>], costs: &[f64]) -> Result<Self, ModelError> {
        Self::fit_impl(inputs, costs, true)
    }

    fn fit_impl(inputs: &[Vec<f64>], costs: &[f64], noisy: bool) -> Result<Self, ModelError> {
        let (dim, y) = Self::prepare(inputs, costs)?;
        let mut b = bounds(dim);
        if !noisy {
            b.pop();
        }
        let full = |theta: &[f64]| -> Vec<f64> {
            let mut t = theta.to_vec();
            if !noisy {
                t.push(f64::NEG_INFINITY);
            }
            t
        };
        let lml = |theta: &[f64]| log_marginal_likelihood(inputs, &y.0, &full(theta));

        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in 0..LML_STARTS {
            let start: Vec<f64> = if s == 0 {
                let mut t = vec![(0.3f64).ln(); dim];
                t.push(0.0);
                if noisy {
                    t.push((1e-6f64).ln());
                }
                t
            } else {
                let u = halton(s, b.len());
                b.iter().zip(u).map(|((lo, hi), u)| lo + u * (hi - lo)).collect()
            };
            let (theta, v) = pattern_search(&lml, start, &b);
            if v.is_finite() && best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((theta, v));
            }
        }
        let hyper = match best {
            Some((theta, _)) => Hyperparameters::from_log(&full(&theta)),
            None => Hyperparameters {
                length_scales: vec![0.3; dim],
                signal_variance: 1.0,
                noise_variance: if noisy { 1e-6 } else { 0.0 },
            },
        };
        Self::assemble(inputs, costs, y, hyper)
    }

    /// Condition on the data with fixed hyperparameters.
    pub fn with_hyperparameters(
        inputs: &[Vec<f64>],
        costs: &[f64],
        hyper: Hyperparameters,
    ) -> Result<Self, ModelError> {
        let (dim, y) = Self::prepare(inputs, costs)?;
        if hyper.length_scales.len() != dim {
            return Err(ModelError::Dimension {
                expected: dim,
                got: hyper.length_scales.len(),
            });
        }
        Self::assemble(inputs, costs, y, hyper)
    }

    fn prepare(inputs: &[Vec<f64>], costs: &[f64]) -> Result<(usize, Standardized), ModelError> {
        if inputs.len() != costs.len() {
            return Err(ModelError::Dimension {
                expected: inputs.len(),
                got: costs.len(),
            });
        }
        let dim = inputs.first().map_or(0, Vec::len);
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(ModelError::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        let distinct = inputs.iter().any(|x| x != &inputs[0]);
        if inputs.len() < 2 || !distinct || dim == 0 {
            return Err(ModelError::TooFewPoints);
        }
        Ok((dim, Standardized::new(costs)))
    }

    fn assemble(
        inputs: &[Vec<f64>],
        costs: &[f64],
        y: Standardized,
        hyper: Hyperparameters,
    ) -> Result<Self, ModelError> {
        let f = factor(inputs, &y.0, &hyper, true).ok_or(ModelError::Singular { jitter: MAX_JITTER })?;
        Ok(Self {
            inputs: inputs.to_vec(),
            costs: costs.to_vec(),
            y_mean: y.1,
            y_scale: y.2,
            hyper,
            jitter: f.jitter,
            chol: f.chol,
            alpha: f.alpha,
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dimension(&self) -> usize {
        self.hyper.length_scales.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Posterior mean and (latent) variance of the cost at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| self.hyper.kernel(xi, x)));
        let mean = ks.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .unwrap_or_else(|| DVector::zeros(ks.len()));
        let var = (self.hyper.signal_variance - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * self.y_scale * var)
    }
}

/// Costs shifted to zero mean and unit spread: (values, mean, scale).
struct Standardized(DVector<f64>, f64, f64);

impl Standardized {
    fn new(costs: &[f64]) -> Self {
        let n = costs.len() as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self(
            DVector::from_iterator(costs.len(), costs.iter().map(|c| (c - mean) / scale)),
            mean,
            scale,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn squares() -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64 / 5.0]).collect();
        let ys = xs.iter().map(|x| x[0] * x[0]).collect();
        (xs, ys)
    }

    #[test]
    fn interpolates_noiseless_data() {
        let (xs, ys) = squares();
        let m = GpModel::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (mu, _) = m.predict(x);
            assert!((mu - y).abs() < 1e-6, "{mu} vs {y}");
        }
        let (mu, var) = m.predict(&[0.55]);
        assert!((mu - 0.3025).abs() < 0.01, "{mu}");
        assert!(var >= 0.0);
    }

    #[test]
    fn noisy_fit_estimates_noise() {
        let xs: Vec<Vec<f64>> = (0..30).map(|k| vec![k as f64 / 29.0]).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(k, x)| x[0] + if k % 2 == 0 { 0.05 } else { -0.05 })
            .collect();
        let m = GpModel::fit_noisy(&xs, &ys).unwrap();
        assert!(m.hyperparameters().noise_variance > 1e-3);
        let (mu, _) = m.predict(&[0.5]);
        assert!((mu - 0.5).abs() < 0.05, "{mu}");
    }

    #[test]
    fn constant_data_predicts_constant() {
        let xs = vec![vec![0.2], vec![0.8]];
        let m = GpModel::fit(&xs, &[1.5, 1.5]).unwrap();
        let (mu, _) = m.predict(&[0.5]);
        assert!((mu - 1.5).abs() < 1e-9);
    }

    #[test]
    fn needs_two_distinct_points() {
        assert_eq!(
            GpModel::fit(&[vec![0.1]], &[1.0]).unwrap_err(),
            ModelError::TooFewPoints
        );
        assert_eq!(
            GpModel::fit(&[vec![0.1], vec![0.1]], &[1.0, 2.0]).unwrap_err(),
            ModelError::TooFewPoints
        );
    }

    #[test]
    fn duplicate_inputs_are_absorbed_by_jitter() {
        let xs = vec![vec![0.1], vec![0.1], vec![0.9]];
        let h = Hyperparameters {
            length_scales: vec![0.5],
            signal_variance: 1.0,
            noise_variance: 0.0,
        };
        let m = GpModel::with_hyperparameters(&xs, &[1.0, 1.0, 2.0], h).unwrap();
        assert!(m.jitter() >= BASE_JITTER);
    }
}
