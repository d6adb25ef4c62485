use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::model::pulse::PulseShape;

pub const DEFAULT_N_Z: usize = 200;
/// Minimum number of time samples across the shortest pulse FWHM.
pub const POINTS_PER_FWHM: usize = 200;
/// Largest accepted number of samples along either axis.
pub const MAX_GRID_POINTS: usize = 20_000_000;

/// Uniform discretization of ζ ∈ [0, 1] and of a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_z: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub n_t: usize,
}

impl GridSpec {
    pub fn new(n_z: usize, t_start: f64, t_end: f64, n_t: usize) -> Self {
        Self {
            n_z,
            t_start,
            t_end,
            n_t,
        }
    }

    /// Smallest window containing every pulse's support, sampled so that the
    /// shortest characteristic width spans at least `points_per_width` steps.
    pub fn covering(pulses: &[&PulseShape], n_z: usize, points_per_width: usize) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut shortest = f64::INFINITY;
        for p in pulses {
            let (a, b) = p.support();
            lo = lo.min(a);
            hi = hi.max(b);
            shortest = shortest.min(p.characteristic_width());
        }
        let dt_max = shortest / points_per_width as f64;
        let n_t = ((hi - lo) / dt_max).ceil().min(MAX_GRID_POINTS as f64) as usize + 1;
        Self::new(n_z, lo, hi, n_t.max(2))
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_t - 1) as f64
    }

    pub fn dz(&self) -> f64 {
        1.0 / (self.n_z - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_t).map(|k| self.t_start + k as f64 * dt).collect()
    }

    pub fn zeta(&self) -> Vec<f64> {
        let dz = self.dz();
        (0..self.n_z).map(|j| j as f64 * dz).collect()
    }

    /// Same window with both resolutions multiplied by `factor` (intervals,
    /// not points, are multiplied so the old nodes stay on the new grid).
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_z: (self.n_z - 1) * factor + 1,
            n_t: (self.n_t - 1) * factor + 1,
            ..*self
        }
    }

    pub(crate) fn validate(&self, field: &str, errs: &mut ValidationError) {
        if self.n_z < 2 {
            errs.push(format!("{field}.n_z"), "need n_z >= 2");
        }
        if self.n_t < 2 {
            errs.push(format!("{field}.n_t"), "need n_t >= 2");
        }
        for (axis, n) in [("n_z", self.n_z), ("n_t", self.n_t)] {
            if n > MAX_GRID_POINTS {
                errs.push(
                    format!("{field}.{axis}"),
                    format!("{n} points exceeds the limit of {MAX_GRID_POINTS} (is a control Rabi frequency unphysically large?)"),
                );
            }
        }
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            errs.push(
                format!("{field}.t_end"),
                format!("need t_end > t_start, got [{}, {}]", self.t_start, self.t_end),
            );
        }
    }

    pub(crate) fn check_contains(&self, field: &str, pulse_field: &str, p: &PulseShape, errs: &mut ValidationError) {
        let (a, b) = p.support();
        let tol = 1e-9 * (self.t_end - self.t_start).abs().max(1.0);
        if a < self.t_start - tol || b > self.t_end + tol {
            errs.push(
                format!("{field}.t_start"),
                format!(
                    "window [{}, {}] does not cover {pulse_field} support [{a}, {b}]",
                    self.t_start, self.t_end
                ),
            );
        }
    }
}
