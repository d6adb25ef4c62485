//! Figures of merit computed from simulation results.

use serde::{Deserialize, Serialize};

use crate::dynamics::{SimulationResult, LEDGER_TOLERANCE};
use crate::error::{Error, ValidationError};
use crate::model::{Scenario, ScenarioConfig, WidthConvention};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryFigures {
    pub efficiency: f64,
    pub leakage_fraction: f64,
    pub incoherent_fraction: f64,
    pub storage_time: f64,
    /// Delay-bandwidth product, when a decay time is known.
    pub dbp: Option<f64>,
    /// Width convention used for the DBP denominator.
    pub dbp_width_convention: Option<WidthConvention>,
}

impl MemoryFigures {
    pub fn from_result(s: &Scenario, r: &SimulationResult) -> Result<Self, Error> {
        let input = r.ledger.input;
        Ok(Self {
            efficiency: efficiency(r)?,
            leakage_fraction: r.ledger.leak_energy / input,
            incoherent_fraction: r.ledger.incoherent_loss / input,
            storage_time: s.storage_time,
            dbp: None,
            dbp_width_convention: None,
        })
    }

    /// Attach a DBP computed from `decay_time` and the signal width in the
    /// given convention.
    pub fn with_dbp(mut self, s: &Scenario, decay_time: f64, convention: WidthConvention) -> Result<Self, Error> {
        let width = signal_width(s, convention)
            .ok_or_else(|| ValidationError::single("signal", "delay-bandwidth product needs a Gaussian signal"))?;
        self.dbp = Some(delay_bandwidth_product(decay_time, width)?);
        self.dbp_width_convention = Some(convention);
        Ok(self)
    }

    pub fn consistent(&self) -> bool {
        self.efficiency + self.leakage_fraction + self.incoherent_fraction <= 1.0 + LEDGER_TOLERANCE
    }
}

/// Retrieved energy over input energy. Computed from the retrieved trace
/// itself, independently of the ledger.
pub fn efficiency(result: &SimulationResult) -> Result<f64, Error> {
    if result.retrieved.is_empty() {
        return Err(Error::MissingRetrieval);
    }
    Ok(result.retrieved.energy() / result.ledger.input)
}

/// Decay time over pulse width; both in the same unit.
pub fn delay_bandwidth_product(decay_time_us: f64, pulse_width_us: f64) -> Result<f64, ValidationError> {
    let mut errs = ValidationError::default();
    if !(decay_time_us > 0.0) {
        errs.push("decay_time_us", format!("must be > 0, got {decay_time_us}"));
    }
    if !(pulse_width_us > 0.0) {
        errs.push("pulse_width_us", format!("must be > 0, got {pulse_width_us}"));
    }
    errs.into_result()?;
    Ok(decay_time_us / pulse_width_us)
}

/// Closed-form passive loss `1 − exp(−d γ²/(γ² + Δ²))` of a Lorentzian line.
pub fn incoherent_fraction(s: &ScenarioConfig) -> f64 {
    1.0 - passive_transmission(s.optical_depth, s.gamma, s.delta)
}

/// Intensity transmission of the bare line at detuning `delta`.
pub fn passive_transmission(optical_depth: f64, gamma: f64, delta: f64) -> f64 {
    let g2 = gamma * gamma;
    if g2 == 0.0 {
        return 1.0;
    }
    (-optical_depth * g2 / (g2 + delta * delta)).exp()
}

fn signal_width(s: &Scenario, convention: WidthConvention) -> Option<f64> {
    match &s.signal.envelope {
        crate::model::Envelope::Gaussian { width, .. } => Some(width.convert(convention).value),
        crate::model::Envelope::Samples(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{EnergyLedger, FieldTrace, SpinWave};
    use crate::model::units::{mhz, RB87_D1_GAMMA};
    use num_complex::Complex64;

    fn result_with(retrieved: FieldTrace) -> SimulationResult {
        SimulationResult {
            input: FieldTrace::default(),
            leak: FieldTrace::default(),
            retrieved,
            spinwave_after_storage: SpinWave::default(),
            spinwave_final: SpinWave::default(),
            ledger: EnergyLedger {
                input: 1.0,
                ..Default::default()
            },
        }
    }

    #[test]
    fn identity_and_zero_efficiency() {
        let times: Vec<f64> = (0..2001).map(|k| -10.0 + 0.01 * k as f64).collect();
        let sigma: f64 = 5.0 / 2.354_820_045_030_949 * std::f64::consts::SQRT_2;
        let amp = (1.0 / (sigma * std::f64::consts::PI.sqrt())).sqrt();
        let values = times
            .iter()
            .map(|t| Complex64::new(amp * (-(t * t) / (2.0 * sigma * sigma)).exp(), 0.0))
            .collect();
        let r = result_with(FieldTrace {
            times: times.clone(),
            values,
        });
        assert!((efficiency(&r).unwrap() - 1.0).abs() < 1e-4);
        let zero = result_with(FieldTrace {
            values: vec![Complex64::new(0.0, 0.0); times.len()],
            times,
        });
        assert_eq!(efficiency(&zero).unwrap(), 0.0);
        assert!(matches!(
            efficiency(&result_with(FieldTrace::default())),
            Err(Error::MissingRetrieval)
        ));
    }

    #[test]
    fn delay_bandwidth_values() {
        let dbp = delay_bandwidth_product(60.0, 0.36).unwrap();
        assert!((dbp - 166.666_666_666_666_67).abs() < 1e-9);
        assert!(((dbp - 160.0) / 160.0).abs() < 0.10);
        assert_eq!(delay_bandwidth_product(3.0, 3.0).unwrap(), 1.0);
        assert!((delay_bandwidth_product(110.0, 5.0).unwrap() - 22.0).abs() < 1e-12);
        assert!(delay_bandwidth_product(0.0, 1.0).is_err());
        assert!(delay_bandwidth_product(1.0, -1.0).is_err());
    }

    #[test]
    fn passive_loss_closed_form() {
        let mut s = ScenarioConfig::experiment_like();
        s.optical_depth = 500.0;
        s.gamma = RB87_D1_GAMMA;
        s.delta = mhz(230.0);
        let f = incoherent_fraction(&s);
        assert!((f - 0.0751).abs() < 1e-3, "{f}");
        assert!(f > 0.05);
        s.optical_depth = 0.0;
        assert_eq!(incoherent_fraction(&s), 0.0);
        s.optical_depth = 1.0;
        s.delta = 0.0;
        assert!((incoherent_fraction(&s) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn loss_monotone(d in 0.0f64..1000.0, dd in 0.1f64..100.0, delta in 0.0f64..2000.0, dx in 0.1f64..100.0) {
            let g = RB87_D1_GAMMA;
            let loss = |d: f64, delta: f64| 1.0 - passive_transmission(d, g, delta);
            proptest::prop_assert!(loss(d + dd, delta) >= loss(d, delta));
            proptest::prop_assert!(loss(d, delta + dx) <= loss(d, delta));
        }
    }
}
