//! Storage and forward/backward retrieval in a Λ-system ensemble.
//!
//! The stored spin wave is handed from the write stage to the read stage
//! analytically: it decays by `exp(−γ₀ T)` over the storage time `T` and is
//! optionally scaled by the motional-dephasing factor. Backward retrieval
//! integrates the same equations in the reversed coordinate `ζ' = 1 − ζ`.

mod convergence;
mod ledger;
pub(crate) mod solver;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable, CONVERGENCE_TOLERANCE};
pub use ledger::{EnergyLedger, LEDGER_TOLERANCE};

use crate::dephasing::apply_dephasing;
use crate::error::{Error, SolverError, ValidationError};
use crate::model::{Direction, GridSpec, PulseShape, Scenario};
use solver::{integrate, trapezoid_norm_sqr, Medium, Stage};

/// Complex envelope sampled at uniformly spaced times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldTrace {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl FieldTrace {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoidal `∫|E|² dt`.
    pub fn energy(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        let dt = self.times[1] - self.times[0];
        trapezoid_norm_sqr(&self.values, dt)
    }
}

/// Spin-wave amplitude S(ζ) on the uniform ζ grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpinWave {
    pub zeta: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl SpinWave {
    pub fn zeros(n_z: usize) -> Self {
        Self::from_values(vec![Complex64::new(0.0, 0.0); n_z])
    }

    pub fn from_values(values: Vec<Complex64>) -> Self {
        let n = values.len();
        let zeta = (0..n).map(|j| j as f64 / (n.max(2) - 1) as f64).collect();
        Self { zeta, values }
    }

    /// Excitation number `N_s = ∫|S|² dζ`.
    pub fn excitation(&self) -> f64 {
        if self.values.len() < 2 {
            return 0.0;
        }
        trapezoid_norm_sqr(&self.values, 1.0 / (self.values.len() - 1) as f64)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            zeta: self.zeta.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// Input boundary field E(0, t) over the storage window.
    pub input: FieldTrace,
    /// Transmitted signal E(1, t) during storage.
    pub leak: FieldTrace,
    /// Recalled signal at the output face (ζ = 1 forward, ζ = 0 backward),
    /// timed by the read clock. Empty when no retrieval was run.
    pub retrieved: FieldTrace,
    pub spinwave_after_storage: SpinWave,
    /// Spin wave left after retrieval, in the original ζ coordinate.
    pub spinwave_final: SpinWave,
    pub ledger: EnergyLedger,
}

fn trace(grid: &GridSpec, values: Vec<Complex64>) -> FieldTrace {
    FieldTrace {
        times: grid.times(),
        values,
    }
}

fn storage_medium(s: &Scenario) -> Medium {
    Medium {
        kappa: s.coupling(),
        gamma: s.gamma,
        delta: s.delta,
        gamma0: s.gamma0,
        delta2: s.delta2,
    }
}

fn read_medium(s: &Scenario, direction: Direction) -> Medium {
    let mut m = storage_medium(s);
    if direction == Direction::Backward && s.mirror_read_detuning {
        m.delta = -m.delta;
        m.delta2 = -m.delta2;
    }
    m
}

/// Write stage: the signal enters at ζ = 0 onto an empty ensemble.
pub fn simulate_storage(s: &Scenario) -> Result<SimulationResult, SolverError> {
    simulate_storage_scaled(s, Complex64::new(1.0, 0.0))
}

/// Write stage with the input field multiplied by `c` (input energy `|c|²`).
pub fn simulate_storage_scaled(s: &Scenario, c: Complex64) -> Result<SimulationResult, SolverError> {
    let g = &s.grid;
    let stage = Stage {
        medium: storage_medium(s),
        mode: s.solver_mode,
        n_z: g.n_z,
        t_start: g.t_start,
        dt: g.dt(),
        n_t: g.n_t,
        control: &s.control_store,
        input: Some((&s.signal, c)),
    };
    let out = integrate(&stage, &vec![Complex64::new(0.0, 0.0); g.n_z])?;
    let input = trace(g, g.times().iter().map(|&t| c * s.signal.value(t)).collect());
    let leak = trace(g, out.boundary);
    let spin = SpinWave::from_values(out.spin);
    let ledger = EnergyLedger {
        input: c.norm_sqr(),
        leak_energy: leak.energy(),
        retrieved_energy: 0.0,
        spin_residual: spin.excitation(),
        incoherent_loss: out.loss + out.polarization_residual,
    };
    Ok(SimulationResult {
        input,
        leak,
        retrieved: FieldTrace::default(),
        spinwave_after_storage: spin.clone(),
        spinwave_final: spin,
        ledger,
    })
}

/// Read stage with the scenario's read control and direction.
pub fn simulate_retrieval(s: &Scenario, sw: &SpinWave) -> Result<SimulationResult, Error> {
    simulate_retrieval_with(s, sw, &s.control_read, s.retrieval_direction, s.storage_time)
}

/// Read stage with an explicit control pulse, direction and idle time.
///
/// The ledger's `input` is the excitation handed in; the idle decay
/// `1 − exp(−2γ₀ T)` of it is booked as incoherent loss.
pub fn simulate_retrieval_with(
    s: &Scenario,
    sw: &SpinWave,
    control: &PulseShape,
    direction: Direction,
    idle_time: f64,
) -> Result<SimulationResult, Error> {
    let g = &s.read_grid;
    if sw.values.len() != g.n_z {
        return Err(ValidationError::single(
            "spinwave",
            format!(
                "spin wave has {} points, read grid has n_z = {}",
                sw.values.len(),
                g.n_z
            ),
        )
        .into());
    }
    let stored = sw.excitation();
    let decay = (-s.gamma0 * idle_time).exp();
    let n = g.n_z;
    let dz = g.dz();

    let initial: Vec<Complex64> = match direction {
        Direction::Forward => sw.values.iter().map(|v| v * decay).collect(),
        Direction::Backward => (0..n)
            .map(|j| {
                let zp = j as f64 * dz;
                sw.values[n - 1 - j] * Complex64::from_polar(decay, s.kmis * zp)
            })
            .collect(),
    };
    let handed = trapezoid_norm_sqr(&initial, dz);

    let stage = Stage {
        medium: read_medium(s, direction),
        mode: s.solver_mode,
        n_z: n,
        t_start: g.t_start,
        dt: g.dt(),
        n_t: g.n_t,
        control,
        input: None,
    };
    let out = integrate(&stage, &initial)?;
    let final_values: Vec<Complex64> = match direction {
        Direction::Forward => out.spin,
        Direction::Backward => (0..n)
            .map(|j| {
                let zp = (n - 1 - j) as f64 * dz;
                out.spin[n - 1 - j] * Complex64::from_polar(1.0, -s.kmis * zp)
            })
            .collect(),
    };
    let retrieved = trace(g, out.boundary);
    let final_sw = SpinWave::from_values(final_values);
    let ledger = EnergyLedger {
        input: stored,
        leak_energy: 0.0,
        retrieved_energy: retrieved.energy(),
        spin_residual: final_sw.excitation(),
        incoherent_loss: (stored - handed) + out.loss + out.polarization_residual,
    };
    Ok(SimulationResult {
        input: FieldTrace::default(),
        leak: FieldTrace::default(),
        retrieved,
        spinwave_after_storage: sw.clone(),
        spinwave_final: final_sw,
        ledger,
    })
}

/// Storage, hand-off (idle decay and optional dephasing), then retrieval.
pub fn simulate_full_protocol(s: &Scenario) -> Result<SimulationResult, Error> {
    let stored = simulate_storage(s)?;
    let sw = stored.spinwave_after_storage.clone();
    let dephased = match &s.dephasing {
        Some(p) => apply_dephasing(&sw, s.storage_time, p),
        None => sw.clone(),
    };
    let dephasing_loss = sw.excitation() - dephased.excitation();
    let read = simulate_retrieval(s, &dephased)?;
    let ledger = EnergyLedger {
        input: stored.ledger.input,
        leak_energy: stored.ledger.leak_energy,
        retrieved_energy: read.ledger.retrieved_energy,
        spin_residual: read.ledger.spin_residual,
        incoherent_loss: stored.ledger.incoherent_loss + dephasing_loss + read.ledger.incoherent_loss,
    };
    Ok(SimulationResult {
        input: stored.input,
        leak: stored.leak,
        retrieved: read.retrieved,
        spinwave_after_storage: sw,
        spinwave_final: read.spinwave_final,
        ledger,
    })
}
