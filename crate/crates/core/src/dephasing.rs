//! Motional-dephasing decay of the memory efficiency,
//!
//! ```text
//! η(t) = η₀ / (1 + (t/τ_D)²)² · exp[−(t/τ_T)² / (1 + (t/τ_D)²)]
//! ```
//!
//! with a diffusion time τ_D and a transit time τ_T, plus a weighted
//! Levenberg-Marquardt fit of (η₀, τ_D, τ_T) to efficiency-versus-time data.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SpinWave;
use crate::error::{FitError, ValidationError};

/// Parameters of the decay model. Infinite times switch a mechanism off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub eta0: f64,
    pub tau_d: f64,
    pub tau_t: f64,
}

impl DecayParams {
    pub fn new(eta0: f64, tau_d: f64, tau_t: f64) -> Self {
        Self { eta0, tau_d, tau_t }
    }

    /// `η(t) / η₀`.
    pub fn shape(&self, t: f64) -> f64 {
        let u = t / self.tau_d;
        let v = t / self.tau_t;
        let q = 1.0 + u * u;
        (-(v * v) / q).exp() / (q * q)
    }

    pub(crate) fn validate(&self, field: &str, errs: &mut ValidationError) {
        if !(0.0..=1.0).contains(&self.eta0) {
            errs.push(
                format!("{field}.eta0"),
                format!("must lie in [0, 1], got {}", self.eta0),
            );
        }
        if !(self.tau_d > 0.0) {
            errs.push(format!("{field}.tau_d"), format!("must be > 0, got {}", self.tau_d));
        }
        if !(self.tau_t > 0.0) {
            errs.push(format!("{field}.tau_t"), format!("must be > 0, got {}", self.tau_t));
        }
    }
}

pub fn eta_model(t: f64, p: &DecayParams) -> f64 {
    p.eta0 * p.shape(t)
}

/// Scale the stored spin wave so its excitation follows `η(t)/η₀`.
pub fn apply_dephasing(sw: &SpinWave, t: f64, p: &DecayParams) -> SpinWave {
    let amp = p.shape(t).sqrt();
    SpinWave {
        zeta: sw.zeta.clone(),
        values: sw.values.iter().map(|v| v * Complex64::new(amp, 0.0)).collect(),
    }
}

/// One efficiency measurement after storage time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t_us: f64,
    pub efficiency: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub eta0: f64,
    pub tau_d: f64,
    pub tau_t: f64,
    /// `√(Σ wᵢ rᵢ²)`.
    pub residual_norm: f64,
    /// Covariance of (η₀, τ_D, τ_T), scaled by the reduced chi-square.
    pub covariance: [[f64; 3]; 3],
    pub weighted: bool,
    pub iterations: usize,
}

impl DecayFit {
    pub fn params(&self) -> DecayParams {
        DecayParams::new(self.eta0, self.tau_d, self.tau_t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        eta_model(t, &self.params())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Weight residuals by `1/σ²`.
    pub weighted: bool,
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weighted: false,
            max_iterations: 1000,
            step_tolerance: 1e-8,
        }
    }
}

/// Seed fractions of the data time span for the multi-start.
const SEED_FRACTIONS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Upper bound on fitted times (µs), expressed in log space.
const LN_TAU_MAX: f64 = 27.631_021_115_928_547; // ln(1e12)

pub fn fit_decay(data: &[DecayPoint]) -> Result<DecayFit, FitError> {
    fit_decay_with(data, FitOptions::default())
}

pub fn fit_decay_with(data: &[DecayPoint], opts: FitOptions) -> Result<DecayFit, FitError> {
    check_data(data, opts.weighted)?;
    let t_max = data.iter().map(|p| p.t_us).fold(f64::NEG_INFINITY, f64::max);
    let t_min = data.iter().map(|p| p.t_us).fold(f64::INFINITY, f64::min);
    let span = t_max - t_min;
    let eta_seed = data.iter().map(|p| p.efficiency).fold(0.0, f64::max).max(1e-6);

    let mut best: Option<(f64, Vector3<f64>, usize)> = None;
    for frac in SEED_FRACTIONS {
        let ln_tau = (frac * span).ln();
        let start = Vector3::new(eta_seed, ln_tau, ln_tau);
        if let Some((cost, theta, iters)) = levenberg_marquardt(data, start, &opts) {
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, theta, iters));
            }
        }
    }
    let (cost, theta, iterations) = best.ok_or(FitError::NotConverged {
        starts: SEED_FRACTIONS.len(),
        best_cost: f64::NAN,
    })?;

    let tau_d = theta[1].exp();
    let tau_t = theta[2].exp();
    let covariance = covariance(data, &theta, cost, &opts);
    Ok(DecayFit {
        eta0: theta[0],
        tau_d,
        tau_t,
        residual_norm: cost.sqrt(),
        covariance,
        weighted: opts.weighted,
        iterations,
    })
}

fn check_data(data: &[DecayPoint], weighted: bool) -> Result<(), FitError> {
    if data.len() < 4 {
        return Err(FitError::InvalidData(format!(
            "need at least 4 points, got {}",
            data.len()
        )));
    }
    for p in data {
        if !(p.t_us >= 0.0) || !p.t_us.is_finite() {
            return Err(FitError::InvalidData(format!("storage time {} must be >= 0", p.t_us)));
        }
        if !(0.0..=1.0).contains(&p.efficiency) {
            return Err(FitError::InvalidData(format!(
                "efficiency {} outside [0, 1]",
                p.efficiency
            )));
        }
        if weighted && !(p.sigma > 0.0) {
            return Err(FitError::InvalidData(format!(
                "weighted fit needs sigma > 0, got {}",
                p.sigma
            )));
        }
    }
    let t0 = data[0].t_us;
    if data.iter().all(|p| p.t_us == t0) {
        return Err(FitError::InvalidData("all storage times are equal".into()));
    }
    Ok(())
}

/// Model value and its gradient with respect to (η₀, ln τ_D, ln τ_T).
fn model_and_gradient(t: f64, theta: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let u = t * (-theta[1]).exp();
    let v = t * (-theta[2]).exp();
    let (u2, v2) = (u * u, v * v);
    let q = 1.0 + u2;
    let shape = (-v2 / q).exp() / (q * q);
    let eta = theta[0] * shape;
    let d_ln_tau_d = 4.0 * u2 / q - 2.0 * u2 * v2 / (q * q);
    let d_ln_tau_t = 2.0 * v2 / q;
    (eta, Vector3::new(shape, eta * d_ln_tau_d, eta * d_ln_tau_t))
}

fn weight(p: &DecayPoint, opts: &FitOptions) -> f64 {
    if opts.weighted {
        1.0 / (p.sigma * p.sigma)
    } else {
        1.0
    }
}

fn cost(data: &[DecayPoint], theta: &Vector3<f64>, opts: &FitOptions) -> f64 {
    data.iter()
        .map(|p| {
            let r = model_and_gradient(p.t_us, theta).0 - p.efficiency;
            weight(p, opts) * r * r
        })
        .sum()
}

fn normal_equations(data: &[DecayPoint], theta: &Vector3<f64>, opts: &FitOptions) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for p in data {
        let (eta, grad) = model_and_gradient(p.t_us, theta);
        let w = weight(p, opts);
        jtj += w * grad * grad.transpose();
        jtr += w * grad * (eta - p.efficiency);
    }
    (jtj, jtr)
}

fn clamp_theta(theta: &mut Vector3<f64>) {
    theta[1] = theta[1].min(LN_TAU_MAX);
    theta[2] = theta[2].min(LN_TAU_MAX);
}

/// Returns (cost, θ, iterations) on convergence.
fn levenberg_marquardt(
    data: &[DecayPoint],
    mut theta: Vector3<f64>,
    opts: &FitOptions,
) -> Option<(f64, Vector3<f64>, usize)> {
    let scale: f64 = data
        .iter()
        .map(|p| weight(p, opts) * p.efficiency * p.efficiency)
        .sum::<f64>()
        .max(1e-300);
    let mut lambda = 1e-3;
    let mut c = cost(data, &theta, opts);
    for iter in 0..opts.max_iterations {
        if c <= 1e-30 * scale {
            return Some((c, theta, iter));
        }
        let (jtj, jtr) = normal_equations(data, &theta, opts);
        if jtr.amax() <= 1e-15 * scale.sqrt() * (1.0 + jtj.diagonal().amax().sqrt()) {
            return Some((c, theta, iter));
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * jtj.diagonal().amax()).max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = theta + step;
            clamp_theta(&mut trial);
            if trial[0] < 0.0 {
                trial[0] = 0.5 * theta[0];
            }
            let ct = cost(data, &trial, opts);
            if ct.is_finite() && ct <= c {
                let rel = Vector3::new(
                    (trial[0] - theta[0]).abs() / theta[0].abs().max(1e-300),
                    (trial[1] - theta[1]).abs(),
                    (trial[2] - theta[2]).abs(),
                )
                .amax();
                // A time pinned at the upper bound has left the model; only the
                // remaining parameters decide convergence.
                let pinned = |k: usize| trial[k] >= LN_TAU_MAX && step[k] > 0.0;
                let rel_free = if pinned(1) || pinned(2) {
                    (trial[0] - theta[0]).abs() / theta[0].abs().max(1e-300)
                } else {
                    rel
                };
                theta = trial;
                let improved = c - ct;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_free < opts.step_tolerance || (improved <= 1e-16 * c && rel < 1e-6) {
                    return Some((c, theta, iter + 1));
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: a stationary point to working precision.
            return Some((c, theta, iter));
        }
    }
    None
}

fn covariance(data: &[DecayPoint], theta: &Vector3<f64>, cost: f64, opts: &FitOptions) -> [[f64; 3]; 3] {
    let (jtj, _) = normal_equations(data, theta, opts);
    let dof = (data.len() as f64 - 3.0).max(1.0);
    let Some(inv) = jtj.try_inverse() else {
        return [[f64::NAN; 3]; 3];
    };
    let cov = inv * (cost / dof);
    let d = Vector3::new(1.0, theta[1].exp(), theta[2].exp());
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = cov[(i, j)] * d[i] * d[j];
        }
    }
    out
}

/// Sample the model at `times`, optionally with additive Gaussian noise of
/// standard deviation `noise` (clamped to [0, 1]).
pub fn synthetic_curve(p: &DecayParams, times: &[f64], noise: f64, seed: u64) -> Vec<DecayPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("finite noise");
    times
        .iter()
        .map(|&t| {
            let clean = eta_model(t, p);
            let eta = if noise > 0.0 {
                (clean + normal.sample(&mut rng)).clamp(0.0, 1.0)
            } else {
                clean
            };
            DecayPoint {
                t_us: t,
                efficiency: eta,
                sigma: noise,
            }
        })
        .collect()
}

/// Fit `replicates` independent noisy realizations of the model in parallel;
/// replicate `k` draws its noise from a stream seeded by `seed + k`.
pub fn monte_carlo_fits(
    p: &DecayParams,
    times: &[f64],
    noise: f64,
    replicates: usize,
    seed: u64,
) -> Vec<Result<DecayFit, FitError>> {
    (0..replicates)
        .into_par_iter()
        .map(|k| fit_decay(&synthetic_curve(p, times, noise, seed.wrapping_add(k as u64))))
        .collect()
}

/// `n` evenly spaced times on `[0, t_max]`.
pub fn linspace(t_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment() -> DecayParams {
        DecayParams::new(0.69, 110.0, 170.0)
    }

    #[test]
    fn model_at_zero_is_eta0() {
        assert_eq!(eta_model(0.0, &experiment()), 0.69);
    }

    #[test]
    fn model_at_diffusion_time() {
        // 0.69 / 4 · exp(−(110/170)² / 2), evaluated independently.
        let expected = 0.69 / 4.0 * (-(110.0f64 / 170.0).powi(2) / 2.0).exp();
        assert!((eta_model(110.0, &experiment()) - expected).abs() < 1e-15);
        assert!((expected - 0.140).abs() < 5e-4);
    }

    #[test]
    fn infinite_times_disable_decay() {
        let p = DecayParams::new(0.5, f64::INFINITY, f64::INFINITY);
        for t in [0.0, 1.0, 1e3, 1e6] {
            assert_eq!(eta_model(t, &p), 0.5);
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let data = synthetic_curve(&experiment(), &linspace(200.0, 20), 0.0, 0);
        let fit = fit_decay(&data).unwrap();
        assert!((fit.eta0 / 0.69 - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.tau_d / 110.0 - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.tau_t / 170.0 - 1.0).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn flat_curve_fits_eta0() {
        let data: Vec<DecayPoint> = linspace(100.0, 10)
            .into_iter()
            .map(|t| DecayPoint {
                t_us: t,
                efficiency: 0.5,
                sigma: 0.01,
            })
            .collect();
        let fit = fit_decay(&data).unwrap();
        assert!((fit.eta0 - 0.5).abs() < 1e-6, "{fit:?}");
        assert!(fit.residual_norm < 1e-6);
    }

    #[test]
    fn rejects_bad_data() {
        let few = synthetic_curve(&experiment(), &[0.0, 10.0, 20.0], 0.0, 0);
        assert!(matches!(fit_decay(&few), Err(FitError::InvalidData(_))));
        let same: Vec<DecayPoint> = (0..5)
            .map(|_| DecayPoint {
                t_us: 3.0,
                efficiency: 0.4,
                sigma: 0.0,
            })
            .collect();
        assert!(matches!(fit_decay(&same), Err(FitError::InvalidData(_))));
        let mut bad = synthetic_curve(&experiment(), &linspace(100.0, 5), 0.0, 0);
        bad[2].efficiency = 1.4;
        assert!(fit_decay(&bad).is_err());
        bad[2].efficiency = 0.4;
        bad[3].t_us = -1.0;
        assert!(fit_decay(&bad).is_err());
    }

    #[test]
    fn weighted_fit_needs_sigma() {
        let data = synthetic_curve(&experiment(), &linspace(200.0, 8), 0.0, 0);
        let opts = FitOptions {
            weighted: true,
            ..Default::default()
        };
        assert!(fit_decay_with(&data, opts).is_err());
        let with_sigma: Vec<_> = data.iter().map(|p| DecayPoint { sigma: 0.02, ..*p }).collect();
        let fit = fit_decay_with(&with_sigma, opts).unwrap();
        assert!((fit.tau_d / 110.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dephasing_at_diffusion_time_quarters_energy() {
        let sw = SpinWave {
            zeta: vec![0.0, 0.5, 1.0],
            values: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(-1.0, 1.0),
            ],
        };
        let p = DecayParams::new(0.69, 30.0, f64::INFINITY);
        assert_eq!(apply_dephasing(&sw, 0.0, &p), sw);
        let out = apply_dephasing(&sw, 30.0, &p);
        assert!((out.excitation() / sw.excitation() - 0.25).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn model_is_non_increasing(eta0 in 0.01f64..1.0, td in 1.0f64..500.0, tt in 1.0f64..500.0, t in 0.0f64..1000.0, dt in 0.0f64..100.0) {
            let p = DecayParams::new(eta0, td, tt);
            proptest::prop_assert!(eta_model(t + dt, &p) <= eta_model(t, &p) + 1e-15);
            proptest::prop_assert!(eta_model(1e9, &p) < 1e-12);
        }

        #[test]
        fn dephasing_never_adds_excitation(td in 1.0f64..500.0, tt in 1.0f64..500.0, t in 0.0f64..1000.0) {
            let sw = SpinWave {
                zeta: vec![0.0, 1.0],
                values: vec![Complex64::new(0.3, 0.1), Complex64::new(0.2, -0.7)],
            };
            let out = apply_dephasing(&sw, t, &DecayParams::new(0.7, td, tt));
            proptest::prop_assert!(out.excitation() <= sw.excitation() * (1.0 + 1e-15));
        }
    }
}
