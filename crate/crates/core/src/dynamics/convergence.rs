use serde::{Deserialize, Serialize};

use crate::dynamics::simulate_full_protocol;
use crate::error::Error;
use crate::model::{validate_scenario, Scenario};

/// Largest efficiency change (absolute) tolerated between the last two
/// refinement levels.
pub const CONVERGENCE_TOLERANCE: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_z: usize,
    pub n_t: usize,
    pub read_n_t: usize,
    pub efficiency: f64,
    pub leak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub converged: bool,
}

impl ConvergenceTable {
    /// Efficiency change caused by the first doubling of the base grid.
    pub fn first_drift(&self) -> f64 {
        self.drift(1)
    }

    /// Efficiency change caused by the last doubling.
    pub fn last_drift(&self) -> f64 {
        self.drift(self.rows.len() - 1)
    }

    fn drift(&self, k: usize) -> f64 {
        if k == 0 || k >= self.rows.len() {
            return 0.0;
        }
        (self.rows[k].efficiency - self.rows[k - 1].efficiency).abs()
    }
}

/// Run the full protocol on the scenario's grids and on `doublings`
/// successive refinements of both (ζ and t resolution doubled together).
pub fn convergence_study(s: &Scenario, doublings: usize) -> Result<ConvergenceTable, Error> {
    let mut rows = Vec::with_capacity(doublings + 1);
    for level in 0..=doublings {
        let mut cfg = s.config().clone();
        let f = 1usize << level;
        cfg.grid = cfg.grid.refined(f);
        cfg.read_grid = cfg.read_grid.refined(f);
        let refined = validate_scenario(cfg)?;
        let r = simulate_full_protocol(&refined)?;
        rows.push(ConvergenceRow {
            n_z: refined.grid.n_z,
            n_t: refined.grid.n_t,
            read_n_t: refined.read_grid.n_t,
            efficiency: r.ledger.retrieved_energy,
            leak: r.ledger.leak_energy,
        });
    }
    let mut table = ConvergenceTable { rows, converged: true };
    table.converged = table.last_drift() <= CONVERGENCE_TOLERANCE;
    Ok(table)
}
