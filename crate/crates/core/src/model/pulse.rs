//! Temporal envelopes for the signal and control fields.
//!
//! Every Gaussian is described through its *intensity* profile
//! `I(t) = exp(-(t - c)² / (2 σ_I²))`; the field envelope is `√I`, so the
//! field itself has standard deviation `σ_f = √2 σ_I`.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::model::grid::GridSpec;

/// `2 √(2 ln 2)`: ratio of the FWHM to the standard deviation of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// How a quoted pulse width maps onto the intensity standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthConvention {
    /// Full width at half maximum of the intensity.
    FwhmIntensity,
    /// Half width at 1/e² of the intensity (`σ_I = w₀ / 2`).
    #[serde(rename = "half_width_1_over_e2")]
    HalfWidth1OverE2,
    /// Full width at 1/e² of the intensity (`σ_I = W / 4`).
    #[serde(rename = "full_width_1_over_e2")]
    FullWidth1OverE2,
}

impl WidthConvention {
    pub fn intensity_sigma(self, width: f64) -> f64 {
        match self {
            Self::FwhmIntensity => width / FWHM_PER_SIGMA,
            Self::HalfWidth1OverE2 => width / 2.0,
            Self::FullWidth1OverE2 => width / 4.0,
        }
    }

    pub fn width_from_intensity_sigma(self, sigma: f64) -> f64 {
        match self {
            Self::FwhmIntensity => sigma * FWHM_PER_SIGMA,
            Self::HalfWidth1OverE2 => sigma * 2.0,
            Self::FullWidth1OverE2 => sigma * 4.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::FwhmIntensity => "fwhm_intensity",
            Self::HalfWidth1OverE2 => "half_width_1_over_e2",
            Self::FullWidth1OverE2 => "full_width_1_over_e2",
        }
    }
}

/// A width value together with the convention it is quoted in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseWidth {
    pub value: f64,
    pub convention: WidthConvention,
}

impl PulseWidth {
    pub fn fwhm(value: f64) -> Self {
        Self {
            value,
            convention: WidthConvention::FwhmIntensity,
        }
    }

    pub fn intensity_sigma(&self) -> f64 {
        self.convention.intensity_sigma(self.value)
    }

    /// The same physical width re-expressed in another convention.
    pub fn convert(&self, to: WidthConvention) -> Self {
        Self {
            value: to.width_from_intensity_sigma(self.intensity_sigma()),
            convention: to,
        }
    }
}

/// Uniformly sampled relative envelope, linearly interpolated and zero outside
/// its span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledEnvelope {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampledEnvelope {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    fn at(&self, t: f64) -> f64 {
        if self.values.is_empty() || t < self.t0 || t > self.t_end() {
            return 0.0;
        }
        let x = (t - self.t0) / self.dt;
        let i = (x.floor() as usize).min(self.values.len() - 1);
        if i + 1 >= self.values.len() {
            return self.values[i];
        }
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Gaussian { center: f64, width: PulseWidth },
    Samples(SampledEnvelope),
}

/// A real, non-negative temporal envelope scaled by `amplitude`.
///
/// For the signal, `amplitude` is in field units (fixed by unit input
/// energy); for a control it is the peak Rabi frequency in rad/µs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub amplitude: f64,
    pub envelope: Envelope,
}

/// Gaussian pulse whose intensity has the requested width.
pub fn make_gaussian_pulse(amplitude: f64, center: f64, width: PulseWidth) -> Result<PulseShape, ValidationError> {
    if !(width.value > 0.0) || !width.value.is_finite() {
        return Err(ValidationError::single(
            "width",
            format!("pulse width must be positive, got {}", width.value),
        ));
    }
    Ok(PulseShape {
        amplitude,
        envelope: Envelope::Gaussian { center, width },
    })
}

/// Trapezoidal `∫|f(t)|² dt` over the grid's time axis.
pub fn pulse_energy(p: &PulseShape, grid: &GridSpec) -> f64 {
    let times = grid.times();
    let dt = grid.dt();
    let mut acc = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let w = if k == 0 || k + 1 == times.len() { 0.5 } else { 1.0 };
        acc += w * p.value(t).powi(2);
    }
    acc * dt
}

impl PulseShape {
    pub fn gaussian_fwhm(amplitude: f64, center: f64, fwhm: f64) -> Self {
        Self {
            amplitude,
            envelope: Envelope::Gaussian {
                center,
                width: PulseWidth::fwhm(fwhm),
            },
        }
    }

    pub fn zero() -> Self {
        Self::gaussian_fwhm(0.0, 0.0, 1.0)
    }

    /// Field envelope `f(t)`.
    pub fn value(&self, t: f64) -> f64 {
        match &self.envelope {
            Envelope::Gaussian { center, width } => {
                let s = width.intensity_sigma();
                let x = t - center;
                self.amplitude * (-(x * x) / (4.0 * s * s)).exp()
            }
            Envelope::Samples(s) => self.amplitude * s.at(t),
        }
    }

    pub fn peak(&self) -> f64 {
        match &self.envelope {
            Envelope::Gaussian { .. } => self.amplitude.abs(),
            Envelope::Samples(s) => self.amplitude.abs() * s.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn center(&self) -> f64 {
        match &self.envelope {
            Envelope::Gaussian { center, .. } => *center,
            Envelope::Samples(s) => 0.5 * (s.t0 + s.t_end()),
        }
    }

    /// Standard deviation of the field envelope (Gaussian only).
    pub fn field_sigma(&self) -> Option<f64> {
        match &self.envelope {
            Envelope::Gaussian { width, .. } => Some(std::f64::consts::SQRT_2 * width.intensity_sigma()),
            Envelope::Samples(_) => None,
        }
    }

    /// Intensity FWHM for Gaussians; the sample span for sampled envelopes.
    pub fn characteristic_width(&self) -> f64 {
        match &self.envelope {
            Envelope::Gaussian { width, .. } => width.convert(WidthConvention::FwhmIntensity).value,
            Envelope::Samples(s) => s.t_end() - s.t0,
        }
    }

    /// Time interval that must lie inside any simulation window using this pulse:
    /// center ± 4 field standard deviations, or the sample span.
    pub fn support(&self) -> (f64, f64) {
        match &self.envelope {
            Envelope::Gaussian { center, .. } => {
                let w = 4.0 * self.field_sigma().unwrap_or(0.0);
                (center - w, center + w)
            }
            Envelope::Samples(s) => (s.t0, s.t_end()),
        }
    }

    /// Analytic `∫|f|² dt` over the whole real line (Gaussian), or the
    /// trapezoid over the samples.
    pub fn analytic_energy(&self) -> f64 {
        match &self.envelope {
            Envelope::Gaussian { .. } => {
                let s = self.field_sigma().unwrap_or(0.0);
                self.amplitude * self.amplitude * s * std::f64::consts::PI.sqrt()
            }
            Envelope::Samples(s) => {
                let n = s.values.len();
                let mut acc = 0.0;
                for (i, v) in s.values.iter().enumerate() {
                    let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                    acc += w * v * v;
                }
                self.amplitude * self.amplitude * acc * s.dt
            }
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            envelope: self.envelope.clone(),
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        let envelope = match &self.envelope {
            Envelope::Gaussian { center, width } => Envelope::Gaussian {
                center: center + dt,
                width: *width,
            },
            Envelope::Samples(s) => Envelope::Samples(SampledEnvelope {
                t0: s.t0 + dt,
                ..s.clone()
            }),
        };
        Self {
            amplitude: self.amplitude,
            envelope,
        }
    }

    pub(crate) fn validate(&self, field: &str, errs: &mut ValidationError) {
        if !self.amplitude.is_finite() {
            errs.push(format!("{field}.amplitude"), "amplitude must be finite");
        }
        match &self.envelope {
            Envelope::Gaussian { center, width } => {
                if !(width.value > 0.0) || !width.value.is_finite() {
                    errs.push(
                        format!("{field}.width"),
                        format!("pulse width must be positive, got {}", width.value),
                    );
                }
                if !center.is_finite() {
                    errs.push(format!("{field}.center"), "center must be finite");
                }
            }
            Envelope::Samples(s) => {
                if s.values.len() < 2 {
                    errs.push(format!("{field}.samples"), "need at least two samples");
                }
                if !(s.dt > 0.0) {
                    errs.push(format!("{field}.samples.dt"), "sample spacing must be positive");
                }
                if s.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    errs.push(format!("{field}.samples"), "samples must be finite and non-negative");
                }
            }
        }
    }
}
