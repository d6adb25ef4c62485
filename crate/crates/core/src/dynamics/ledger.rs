use serde::{Deserialize, Serialize};

/// Default closure tolerance for [`EnergyLedger::closes`].
pub const LEDGER_TOLERANCE: f64 = 1e-3;

/// Where the input energy went, in units of the input energy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub input: f64,
    pub leak_energy: f64,
    pub retrieved_energy: f64,
    pub spin_residual: f64,
    pub incoherent_loss: f64,
}

impl EnergyLedger {
    pub fn accounted(&self) -> f64 {
        self.leak_energy + self.retrieved_energy + self.spin_residual + self.incoherent_loss
    }

    /// `input − Σ entries`.
    pub fn closure_error(&self) -> f64 {
        self.input - self.accounted()
    }

    pub fn closes(&self, tol: f64) -> bool {
        self.closure_error().abs() <= tol
            && [
                self.leak_energy,
                self.retrieved_energy,
                self.spin_residual,
                self.incoherent_loss,
            ]
            .iter()
            .all(|&v| v >= -tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_arithmetic() {
        let l = EnergyLedger {
            input: 1.0,
            leak_energy: 0.1,
            retrieved_energy: 0.7,
            spin_residual: 0.05,
            incoherent_loss: 0.1495,
        };
        assert!((l.closure_error() - 5e-4).abs() < 1e-12);
        assert!(l.closes(LEDGER_TOLERANCE));
        assert!(!EnergyLedger {
            incoherent_loss: -0.01,
            ..l
        }
        .closes(LEDGER_TOLERANCE));
    }
}
