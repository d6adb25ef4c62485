//! Units, physical configuration, pulse shapes and discretization grids.

pub mod grid;
pub mod pulse;
pub mod scenario;
pub mod units;

pub use grid::GridSpec;
pub use pulse::{
    make_gaussian_pulse, pulse_energy, Envelope, PulseShape, PulseWidth, SampledEnvelope, WidthConvention,
};
pub use scenario::{
    validate_scenario, Direction, Scenario, ScenarioConfig, SolverMode, ADIABATIC_MIN_DETUNING_RATIO,
    DEFAULT_READ_AMPLITUDE_FACTOR, EXPERIMENT_RABI,
};
