//! Method-of-lines integrator for the Λ-system Maxwell-Bloch equations.
//!
//! Full mode, co-moving frame, retardation neglected:
//!
//! ```text
//! ∂ζ E = i κ P
//! ∂t P = −(γ + iΔ) P + i κ E + i Ω S
//! ∂t S = −(γ₀ + iδ) S + i Ω* P
//! ```
//!
//! Adiabatic mode eliminates `P = i(κE + ΩS)/(γ + iΔ)`:
//!
//! ```text
//! ∂ζ E = −(κ² E + κ Ω S)/(γ + iΔ)
//! ∂t S = −(γ₀ + iδ) S − (|Ω|² S + κ Ω* E)/(γ + iΔ)
//! ```
//!
//! Each right-hand-side evaluation sweeps E along ζ with the trapezoidal rule
//! (Crank-Nicolson for the linear adiabatic propagation equation)
//! from the boundary value E(0, t); atomic variables and the accumulated loss
//! are then advanced together by classical RK4.

use num_complex::Complex64;

use crate::error::SolverError;
use crate::model::{PulseShape, SolverMode};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// RK4 step bound `rate · dt` in adiabatic mode.
const ADIABATIC_STEP_BOUND: f64 = 0.2;
/// `dt ≤ 0.1 / |γ + iΔ|` (and the same bound on κ² and Ω) in full mode.
const FULL_STEP_BOUND: f64 = 0.1;
/// More RK4 substeps per time step than this is treated as a numerical failure.
const MAX_SUBSTEPS: f64 = 1e6;

/// Rates governing one integration stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Medium {
    pub kappa: f64,
    pub gamma: f64,
    pub delta: f64,
    pub gamma0: f64,
    pub delta2: f64,
}

impl Medium {
    fn optical_denominator(&self) -> Complex64 {
        Complex64::new(self.gamma, self.delta)
    }
}

pub(crate) struct Stage<'a> {
    pub medium: Medium,
    pub mode: SolverMode,
    pub n_z: usize,
    pub t_start: f64,
    pub dt: f64,
    pub n_t: usize,
    pub control: &'a PulseShape,
    /// Boundary field E(0, t) = scale · pulse(t).
    pub input: Option<(&'a PulseShape, Complex64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct StageOutput {
    /// E(1, t) at every grid time.
    pub boundary: Vec<Complex64>,
    pub spin: Vec<Complex64>,
    /// `∫ dt ∫ dζ` of the local loss rate (optical decay plus spin decay).
    pub loss: f64,
    /// `∫|P|² dζ` left at the end of the window (full mode only).
    pub polarization_residual: f64,
}

struct Rhs<'a> {
    stage: &'a Stage<'a>,
    h: f64,
}

impl<'a> Rhs<'a> {
    fn input(&self, t: f64) -> Complex64 {
        match self.stage.input {
            Some((p, scale)) => scale * p.value(t),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Writes d/dt of the state into `dy`; returns E(1, t).
    /// Layout: `[S_0..S_{n-1}, (P_0..P_{n-1}), loss]`.
    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Complex64 {
        match self.stage.mode {
            SolverMode::Adiabatic => self.eval_adiabatic(t, y, dy),
            SolverMode::Full => self.eval_full(t, y, dy),
        }
    }

    fn eval_adiabatic(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Complex64 {
        let m = &self.stage.medium;
        let n = self.stage.n_z;
        let h = self.h;
        let g = 1.0 / m.optical_denominator();
        let om = self.stage.control.value(t);
        let kappa = m.kappa;
        let a = kappa * kappa * g;
        let b = kappa * om * g;
        let cp = 1.0 + 0.5 * h * a;
        let cm = 1.0 - 0.5 * h * a;
        let spin_decay = Complex64::new(m.gamma0, m.delta2);
        let s = &y[..n];

        let mut e = self.input(t);
        let mut optical = 0.0;
        let mut spin = 0.0;
        for j in 0..n {
            let sj = s[j];
            dy[j] = -spin_decay * sj - g * (om * om * sj + kappa * om * e);
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            spin += w * sj.norm_sqr();
            if j + 1 < n {
                let next = (e * cm - 0.5 * h * b * (sj + s[j + 1])) / cp;
                // Cell-midpoint quadrature, matching the Crank-Nicolson sweep.
                optical += (kappa * 0.5 * (e + next) + om * 0.5 * (sj + s[j + 1])).norm_sqr();
                e = next;
            }
        }
        let loss = 2.0 * m.gamma * g.norm_sqr() * optical * h + 2.0 * m.gamma0 * spin * h;
        dy[n] = Complex64::new(loss, 0.0);
        e
    }

    fn eval_full(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Complex64 {
        let m = &self.stage.medium;
        let n = self.stage.n_z;
        let h = self.h;
        let om = self.stage.control.value(t);
        let kappa = m.kappa;
        let opt = m.optical_denominator();
        let spin_decay = Complex64::new(m.gamma0, m.delta2);
        let (s, rest) = y.split_at(n);
        let p = &rest[..n];

        let mut e = self.input(t);
        let mut pol = 0.0;
        let mut spin = 0.0;
        for j in 0..n {
            let (sj, pj) = (s[j], p[j]);
            dy[j] = -spin_decay * sj + I * om * pj;
            dy[n + j] = -opt * pj + I * kappa * e + I * om * sj;
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            pol += w * pj.norm_sqr();
            spin += w * sj.norm_sqr();
            if j + 1 < n {
                e += I * kappa * 0.5 * h * (pj + p[j + 1]);
            }
        }
        let loss = 2.0 * m.gamma * pol * h + 2.0 * m.gamma0 * spin * h;
        dy[2 * n] = Complex64::new(loss, 0.0);
        e
    }
}

fn substeps(stage: &Stage<'_>) -> Option<usize> {
    let m = &stage.medium;
    let om = stage.control.peak();
    let rate = match stage.mode {
        SolverMode::Adiabatic => {
            let g = 1.0 / m.optical_denominator().norm();
            let r = m.gamma0 + m.delta2.abs() + om * om * g + m.kappa * m.kappa * om * om * g * g;
            r / ADIABATIC_STEP_BOUND
        }
        SolverMode::Full => {
            let r = m.optical_denominator().norm().max(m.kappa * m.kappa).max(om);
            r / FULL_STEP_BOUND
        }
    };
    let m = (stage.dt * rate).ceil();
    (m <= MAX_SUBSTEPS).then(|| (m as usize).max(1))
}

/// Integrate one stage from the initial spin wave `s0` (P starts at zero).
pub(crate) fn integrate(stage: &Stage<'_>, s0: &[Complex64]) -> Result<StageOutput, SolverError> {
    let n = stage.n_z;
    assert_eq!(s0.len(), n, "spin wave length must match n_z");
    let width = match stage.mode {
        SolverMode::Adiabatic => n + 1,
        SolverMode::Full => 2 * n + 1,
    };
    let mut y = vec![Complex64::new(0.0, 0.0); width];
    y[..n].copy_from_slice(s0);

    let rhs = Rhs {
        stage,
        h: 1.0 / (n - 1) as f64,
    };
    let fail = |step: usize, time: f64| SolverError {
        n_z: n,
        n_t: stage.n_t,
        step,
        time,
    };
    let m = substeps(stage).ok_or_else(|| fail(0, stage.t_start))?;
    let hs = stage.dt / m as f64;

    let mut k1 = vec![Complex64::new(0.0, 0.0); width];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut boundary = Vec::with_capacity(stage.n_t);

    for k in 0..stage.n_t - 1 {
        let t0 = stage.t_start + k as f64 * stage.dt;
        for sub in 0..m {
            let t = t0 + sub as f64 * hs;
            let out = rhs.eval(t, &y, &mut k1);
            if sub == 0 {
                if !out.re.is_finite() || !out.im.is_finite() {
                    return Err(fail(k, t));
                }
                boundary.push(out);
            }
            for i in 0..width {
                tmp[i] = y[i] + 0.5 * hs * k1[i];
            }
            rhs.eval(t + 0.5 * hs, &tmp, &mut k2);
            for i in 0..width {
                tmp[i] = y[i] + 0.5 * hs * k2[i];
            }
            rhs.eval(t + 0.5 * hs, &tmp, &mut k3);
            for i in 0..width {
                tmp[i] = y[i] + hs * k3[i];
            }
            rhs.eval(t + hs, &tmp, &mut k4);
            for i in 0..width {
                y[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(fail(k + 1, t0 + stage.dt));
        }
    }
    let t_last = stage.t_start + (stage.n_t - 1) as f64 * stage.dt;
    boundary.push(rhs.eval(t_last, &y, &mut k1));

    let polarization_residual = match stage.mode {
        SolverMode::Adiabatic => 0.0,
        SolverMode::Full => trapezoid_norm_sqr(&y[n..2 * n], rhs.h),
    };
    Ok(StageOutput {
        boundary,
        spin: y[..n].to_vec(),
        loss: y[width - 1].re,
        polarization_residual,
    })
}

/// `∫|f|² dx` by the trapezoidal rule on a uniform grid with spacing `h`.
pub(crate) fn trapezoid_norm_sqr(values: &[Complex64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().map(|v| v.norm_sqr()).sum();
    h * (inner + 0.5 * (values[0].norm_sqr() + values[n - 1].norm_sqr()))
}
