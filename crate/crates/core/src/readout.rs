//! Sequential partial readouts of one stored spin wave (a temporal beam
//! splitter).
//!
//! Each read pulse extracts a fraction of the remaining excitation; the
//! residual spin wave is carried into the next readout. With identical
//! pulses the recalled energies fall off geometrically, `E_k ∝ r (1 − r)^k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_retrieval_with, SimulationResult, SpinWave};
use crate::error::{Error, ValidationError};
use crate::model::{PulseShape, Scenario};

/// Default number of readouts.
pub const DEFAULT_TRAIN_PULSES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutTrain {
    pub n_pulses: usize,
    /// Read control used for every readout without an override.
    pub pulse: PulseShape,
    /// Time between successive readout centers, µs.
    pub spacing: f64,
    /// Fraction of the stored excitation that the read mode overlaps.
    pub mode_match: f64,
    /// Per-readout replacements for `pulse`, by index.
    #[serde(default)]
    pub overrides: Vec<Option<PulseShape>>,
    /// Apply spin-wave decay `exp(−γ₀ · spacing)` between readouts.
    #[serde(default)]
    pub decay_between: bool,
}

impl ReadoutTrain {
    /// Identical pulses, unit mode match, default count and spacing.
    pub fn uniform(pulse: PulseShape) -> Self {
        let spacing = default_spacing(&pulse);
        Self {
            n_pulses: DEFAULT_TRAIN_PULSES,
            pulse,
            spacing,
            mode_match: 1.0,
            overrides: Vec::new(),
            decay_between: false,
        }
    }

    pub fn pulse_at(&self, k: usize) -> &PulseShape {
        self.overrides.get(k).and_then(Option::as_ref).unwrap_or(&self.pulse)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut errs = ValidationError::default();
        if self.n_pulses == 0 {
            errs.push("n_pulses", "must be >= 1");
        }
        if !(self.mode_match > 0.0 && self.mode_match <= 1.0) {
            errs.push("mode_match", format!("must lie in (0, 1], got {}", self.mode_match));
        }
        if self.overrides.len() > self.n_pulses {
            errs.push(
                "overrides",
                format!("{} overrides for {} pulses", self.overrides.len(), self.n_pulses),
            );
        }
        for k in 0..self.n_pulses.min(64) {
            let p = self.pulse_at(k);
            p.validate(&format!("pulse[{k}]"), &mut errs);
            let (a, b) = p.support();
            if self.n_pulses > 1 && !(self.spacing > b - a) {
                errs.push(
                    "spacing",
                    format!("must exceed the pulse support {}, got {}", b - a, self.spacing),
                );
                break;
            }
        }
        errs.into_result()
    }
}

/// One and a half support lengths of `pulse`.
pub fn default_spacing(pulse: &PulseShape) -> f64 {
    let (a, b) = pulse.support();
    1.5 * (b - a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// Recalled energy of each readout.
    pub energies: Vec<f64>,
    /// Excitation of the stored spin wave before mode matching.
    pub stored: f64,
    /// Excitation outside the read mode, `(1 − mode_match) · stored`.
    pub unmatched: f64,
    /// Spin excitation left after the last readout.
    pub residual: f64,
    /// Incoherent loss booked by each readout.
    pub losses: Vec<f64>,
    /// Per-readout simulation results (traces in each readout's own clock).
    #[serde(skip)]
    pub readouts: Vec<SimulationResult>,
}

impl TrainResult {
    /// `E_k` over the excitation in the read mode.
    pub fn fractions(&self) -> Vec<f64> {
        let matched = self.stored - self.unmatched;
        self.energies.iter().map(|e| e / matched).collect()
    }

    /// Running sum of [`TrainResult::fractions`].
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.fractions()
            .into_iter()
            .map(|f| {
                acc += f;
                acc
            })
            .collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.energies.iter().sum()
    }

    /// No readout sequence may recall more than the read mode held.
    pub fn conserves(&self, tol: f64) -> bool {
        let accounted = self.total_energy() + self.residual + self.losses.iter().sum::<f64>();
        self.total_energy() <= self.stored - self.unmatched + tol
            && (accounted - (self.stored - self.unmatched)).abs() <= tol.max(1e-3 * self.stored)
    }
}

/// Run `train` against an already stored spin wave `sw`.
///
/// The spin wave decays over the scenario's storage time before the first
/// readout, and by `spacing` between readouts when `decay_between` is set.
pub fn run_readout_train(s: &Scenario, train: &ReadoutTrain, sw: &SpinWave) -> Result<TrainResult, Error> {
    train.validate()?;
    let stored = sw.excitation();
    let matched = sw.scaled(Complex64::new(train.mode_match.sqrt(), 0.0));
    let unmatched = stored - matched.excitation();

    let mut current = matched;
    let mut energies = Vec::with_capacity(train.n_pulses);
    let mut losses = Vec::with_capacity(train.n_pulses);
    let mut readouts = Vec::with_capacity(train.n_pulses);
    for k in 0..train.n_pulses {
        let pulse = train.pulse_at(k);
        let local = with_read_window(s, pulse);
        let idle = if k == 0 {
            s.storage_time
        } else if train.decay_between {
            train.spacing
        } else {
            0.0
        };
        let r = simulate_retrieval_with(&local, &current, pulse, s.retrieval_direction, idle)?;
        energies.push(r.ledger.retrieved_energy);
        losses.push(r.ledger.incoherent_loss);
        current = r.spinwave_final.clone();
        readouts.push(r);
    }
    Ok(TrainResult {
        energies,
        stored,
        unmatched,
        residual: current.excitation(),
        losses,
        readouts,
    })
}

fn with_read_window(s: &Scenario, pulse: &PulseShape) -> Scenario {
    let mut c = s.config().clone();
    c.read_grid = c.read_grid_for(pulse);
    Scenario::from_checked(c)
}

/// Geometric-law estimate of the per-readout extraction ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionEstimate {
    pub ratio: f64,
    /// Standard error of `ratio` from the log-linear fit (0 for two points).
    pub stderr: f64,
    /// Largest relative deviation of the energies from the fitted law.
    pub max_relative_residual: f64,
}

/// Fit `ln E_k = a + k ln(1 − r)` by least squares.
pub fn estimate_extraction_ratio(energies: &[f64]) -> Result<ExtractionEstimate, ValidationError> {
    if energies.len() < 2 {
        return Err(ValidationError::single("energies", "need at least two readouts"));
    }
    if let Some(k) = energies.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(ValidationError::single(
            "energies",
            format!("energy {k} is not positive: {}", energies[k]),
        ));
    }
    if energies.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ValidationError::single(
            "energies",
            "readout energies must strictly decrease",
        ));
    }
    let n = energies.len() as f64;
    let ys: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    let xbar = (n - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = (0..energies.len()).map(|k| (k as f64 - xbar).powi(2)).sum();
    let sxy: f64 = ys.iter().enumerate().map(|(k, y)| (k as f64 - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;

    let resid: Vec<f64> = ys
        .iter()
        .enumerate()
        .map(|(k, y)| y - intercept - slope * k as f64)
        .collect();
    let slope_se = if energies.len() > 2 {
        (resid.iter().map(|r| r * r).sum::<f64>() / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let q = slope.exp();
    let max_relative_residual = resid.iter().map(|r| r.exp_m1().abs()).fold(0.0, f64::max);
    Ok(ExtractionEstimate {
        ratio: 1.0 - q,
        stderr: q * slope_se,
        max_relative_residual,
    })
}

/// Scale the train's read amplitude so that the first readout extracts
/// `target` of the matched excitation. Returns the tuned train and the
/// extraction actually reached.
pub fn tune_first_extraction(
    s: &Scenario,
    train: &ReadoutTrain,
    sw: &SpinWave,
    target: f64,
) -> Result<(ReadoutTrain, f64), Error> {
    if !(target > 0.0 && target < 1.0) {
        return Err(ValidationError::single("target", format!("must lie in (0, 1), got {target}")).into());
    }
    train.validate()?;
    let mut single = train.clone();
    single.n_pulses = 1;
    single.overrides.clear();
    let extraction = |amp: f64| -> Result<f64, Error> {
        let mut t = single.clone();
        t.pulse.amplitude = amp;
        let r = run_readout_train(s, &t, sw)?;
        Ok(r.fractions()[0])
    };

    let mut hi = train.pulse.amplitude.max(1e-3);
    let mut f_hi = extraction(hi)?;
    let mut expansions = 0;
    while f_hi < target {
        hi *= 2.0;
        f_hi = extraction(hi)?;
        expansions += 1;
        if expansions > 12 {
            return Err(ValidationError::single(
                "target",
                format!("first-readout extraction saturates at {f_hi} below {target}"),
            )
            .into());
        }
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let f = extraction(mid)?;
        if (f - target).abs() < 1e-4 {
            hi = mid;
            f_hi = f;
            break;
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    let mut tuned = train.clone();
    tuned.pulse.amplitude = hi;
    Ok((tuned, f_hi))
}
