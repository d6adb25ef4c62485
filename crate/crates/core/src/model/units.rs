//! Unit conventions: time in microseconds, rates and detunings in rad/µs,
//! position as the dimensionless ζ ∈ [0, 1] along the ensemble.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Optical-coherence decay rate (HWHM) of the rubidium-87 D1 line, rad/µs.
pub const RB87_D1_GAMMA: f64 = TWO_PI * 2.875;

/// Cyclic frequency in MHz to angular frequency in rad/µs.
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f
}

/// Angular frequency in rad/µs to cyclic frequency in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / TWO_PI
}
