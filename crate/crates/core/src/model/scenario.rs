use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::dephasing::DecayParams;
use crate::error::ValidationError;
use crate::model::grid::{GridSpec, DEFAULT_N_Z, MAX_GRID_POINTS, POINTS_PER_FWHM};
use crate::model::pulse::{Envelope, PulseShape, SampledEnvelope};
use crate::model::units::{mhz, RB87_D1_GAMMA};

/// Minimum `|Δ| / γ` for which the excited state may be eliminated.
pub const ADIABATIC_MIN_DETUNING_RATIO: f64 = 10.0;

/// Time samples per Raman scattering time of the strongest control.
pub const POINTS_PER_RAMAN_TIME: f64 = 10.0;

/// Read control Rabi frequency relative to the write control.
pub const DEFAULT_READ_AMPLITUDE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Self::Forward => "forward",
            Self::Backward => "backward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Excited state eliminated; valid for `|Δ| ≥ 10 γ`.
    Adiabatic,
    /// Optical polarization integrated explicitly.
    Full,
}

impl SolverMode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Adiabatic => "adiabatic",
            Self::Full => "full",
        }
    }
}

/// Complete physical and numerical description of one memory run.
///
/// Rates and detunings are in rad/µs, times in µs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Resonant intensity optical depth `d` (transmission `e^{-d}` on resonance).
    pub optical_depth: f64,
    /// Optical-coherence decay rate γ (HWHM of the line).
    pub gamma: f64,
    /// Linewidth that fixes the light-atom coupling `κ = √(d γ_c / 2)`.
    /// `None` means `γ_c = γ`. Setting it lets `gamma` go to zero while the
    /// coupling stays finite (the artificial lossless limit).
    pub coupling_gamma: Option<f64>,
    /// Spin-wave decay rate γ₀.
    pub gamma0: f64,
    /// One-photon detuning Δ.
    pub delta: f64,
    /// Two-photon detuning δ.
    pub delta2: f64,
    /// Residual spin-wave wavevector mismatch on backward retrieval,
    /// rad per ensemble length.
    pub kmis: f64,
    pub signal: PulseShape,
    pub control_store: PulseShape,
    /// Read control, timed in the retrieval window's own clock.
    pub control_read: PulseShape,
    pub storage_time: f64,
    pub retrieval_direction: Direction,
    /// Backward retrieval addresses the mirror-image transition, i.e. the
    /// read stage runs at detunings (−Δ, −δ).
    pub mirror_read_detuning: bool,
    /// Storage window.
    pub grid: GridSpec,
    /// Retrieval window (its time axis is the read clock).
    pub read_grid: GridSpec,
    pub solver_mode: SolverMode,
    /// Optional motional dephasing applied to the stored spin wave.
    pub dephasing: Option<DecayParams>,
}

impl ScenarioConfig {
    /// The experiment's parameters: d = 300, Δ = 2π·230 MHz on the Rb D1
    /// line, 5 µs FWHM signal and 9 µs FWHM control leading it by 5 µs,
    /// storage for one signal FWHM, backward retrieval.
    pub fn experiment_like() -> Self {
        let signal = PulseShape::gaussian_fwhm(1.0, 0.0, 5.0);
        let control_store = PulseShape::gaussian_fwhm(EXPERIMENT_RABI, -5.0, 9.0);
        let control_read = control_store.with_amplitude(EXPERIMENT_RABI * DEFAULT_READ_AMPLITUDE_FACTOR);
        let mut s = Self {
            optical_depth: 300.0,
            gamma: RB87_D1_GAMMA,
            coupling_gamma: None,
            gamma0: 0.0,
            delta: mhz(230.0),
            delta2: 0.0,
            kmis: 0.0,
            signal,
            control_store,
            control_read,
            storage_time: 5.0,
            retrieval_direction: Direction::Backward,
            mirror_read_detuning: true,
            grid: GridSpec::new(DEFAULT_N_Z, 0.0, 1.0, 2),
            read_grid: GridSpec::new(DEFAULT_N_Z, 0.0, 1.0, 2),
            solver_mode: SolverMode::Adiabatic,
            dephasing: None,
        };
        s.fit_grids();
        s
    }

    /// Recompute both time windows from the pulses using the default
    /// resolution. `n_z` is kept but raised to at least `⌈d⌉`, since the
    /// residual spin wave after a strong readout varies on the scale `1/d`.
    ///
    /// Each window is also sampled finely enough to resolve the Raman
    /// scattering time `1/R`, `R = κ² Ω² / (γ² + Δ²)`, of its control peak:
    /// a strong read control emits a pulse much shorter than the input.
    pub fn fit_grids(&mut self) {
        let n_z = self.grid.n_z.max(self.optical_depth.ceil() as usize);
        let mut grid = GridSpec::covering(&[&self.signal, &self.control_store], n_z, POINTS_PER_FWHM);
        let dt_store = grid
            .dt()
            .min(self.raman_time(self.control_store.peak()) / POINTS_PER_RAMAN_TIME);
        refine_to(&mut grid, dt_store);
        self.grid = grid;
        self.read_grid = self.read_grid_for(&self.control_read);
    }

    /// A retrieval window covering `control`, at least as fine as the
    /// storage window and resolving the Raman time of its peak.
    pub fn read_grid_for(&self, control: &PulseShape) -> GridSpec {
        let mut g = GridSpec::covering(&[control], self.grid.n_z, POINTS_PER_FWHM);
        let dt = g
            .dt()
            .min(self.grid.dt())
            .min(self.raman_time(control.peak()) / POINTS_PER_RAMAN_TIME);
        refine_to(&mut g, dt);
        g
    }

    /// `1/R` for a control of peak Rabi frequency `rabi`.
    pub fn raman_time(&self, rabi: f64) -> f64 {
        let k = self.coupling();
        let rate = k * k * rabi * rabi / (self.gamma * self.gamma + self.delta * self.delta);
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn with_auto_grids(mut self) -> Self {
        self.fit_grids();
        self
    }

    pub fn coupling(&self) -> f64 {
        let gc = self.coupling_gamma.unwrap_or(self.gamma);
        (self.optical_depth * gc / 2.0).max(0.0).sqrt()
    }

    /// Read control scaled to `factor ×` the write control's peak.
    pub fn set_read_factor(&mut self, factor: f64) {
        self.control_read.amplitude = self.control_store.amplitude * factor;
    }
}

fn refine_to(g: &mut GridSpec, dt: f64) {
    let span = g.t_end - g.t_start;
    let n = (span / dt).ceil().min(MAX_GRID_POINTS as f64) as usize + 1;
    g.n_t = g.n_t.max(n);
}

/// Peak write Rabi frequency (rad/µs) used by [`ScenarioConfig::experiment_like`].
pub const EXPERIMENT_RABI: f64 = 2.0 * std::f64::consts::PI * 4.0;

/// A scenario whose invariants have been checked and whose signal has been
/// normalized to unit input energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario(ScenarioConfig);

impl Deref for Scenario {
    type Target = ScenarioConfig;
    fn deref(&self) -> &ScenarioConfig {
        &self.0
    }
}

impl Scenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.0
    }

    pub fn into_config(self) -> ScenarioConfig {
        self.0
    }

    /// Wrap a config derived from a validated one without re-normalizing.
    pub(crate) fn from_checked(c: ScenarioConfig) -> Self {
        Scenario(c)
    }
}

/// Check every invariant of `s`, reporting all violations by field name,
/// and normalize the signal to unit energy.
pub fn validate_scenario(mut s: ScenarioConfig) -> Result<Scenario, ValidationError> {
    let mut errs = ValidationError::default();
    let finite = |v: f64| v.is_finite();

    if !(s.optical_depth >= 0.0) || !finite(s.optical_depth) {
        errs.push("optical_depth", format!("must be >= 0, got {}", s.optical_depth));
    }
    match s.coupling_gamma {
        None => {
            if !(s.gamma > 0.0) || !finite(s.gamma) {
                errs.push("gamma", format!("must be > 0, got {}", s.gamma));
            }
        }
        Some(gc) => {
            if !(s.gamma >= 0.0) || !finite(s.gamma) {
                errs.push("gamma", format!("must be >= 0, got {}", s.gamma));
            }
            if !(gc > 0.0) || !finite(gc) {
                errs.push("coupling_gamma", format!("must be > 0, got {gc}"));
            }
        }
    }
    if !(s.gamma0 >= 0.0) || !finite(s.gamma0) {
        errs.push("gamma0", format!("must be >= 0, got {}", s.gamma0));
    }
    for (name, v) in [("delta", s.delta), ("delta2", s.delta2), ("kmis", s.kmis)] {
        if !finite(v) {
            errs.push(name, "must be finite");
        }
    }
    if !(s.storage_time >= 0.0) || !finite(s.storage_time) {
        errs.push("storage_time", format!("must be >= 0, got {}", s.storage_time));
    }
    s.signal.validate("signal", &mut errs);
    s.control_store.validate("control_store", &mut errs);
    s.control_read.validate("control_read", &mut errs);
    s.grid.validate("grid", &mut errs);
    s.read_grid.validate("read_grid", &mut errs);
    if s.read_grid.n_z != s.grid.n_z {
        errs.push(
            "read_grid.n_z",
            "must equal grid.n_z (the spin wave is handed over point by point)",
        );
    }
    if errs.is_empty() {
        s.grid.check_contains("grid", "signal", &s.signal, &mut errs);
        s.grid
            .check_contains("grid", "control_store", &s.control_store, &mut errs);
        s.read_grid
            .check_contains("read_grid", "control_read", &s.control_read, &mut errs);
    }
    if s.solver_mode == SolverMode::Adiabatic && s.delta.abs() < ADIABATIC_MIN_DETUNING_RATIO * s.gamma {
        errs.push(
            "delta",
            format!(
                "adiabaticity condition violated: |delta| = {} < {} * gamma = {}",
                s.delta.abs(),
                ADIABATIC_MIN_DETUNING_RATIO,
                ADIABATIC_MIN_DETUNING_RATIO * s.gamma
            ),
        );
    }
    if let Some(p) = &s.dephasing {
        p.validate("dephasing", &mut errs);
    }
    errs.into_result()?;

    normalize_signal(&mut s.signal, &s.grid);
    Ok(Scenario(s))
}

fn normalize_signal(signal: &mut PulseShape, grid: &GridSpec) {
    let energy = match &signal.envelope {
        Envelope::Gaussian { .. } => signal.with_amplitude(1.0).analytic_energy(),
        Envelope::Samples(SampledEnvelope { .. }) => {
            crate::model::pulse::pulse_energy(&signal.with_amplitude(1.0), grid)
        }
    };
    signal.amplitude = if energy > 0.0 { 1.0 / energy.sqrt() } else { 0.0 };
}
