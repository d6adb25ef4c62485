//! Maxwell-Bloch simulation of an off-resonant Raman quantum memory.
//!
//! A [`model::ScenarioConfig`] describes the ensemble, the pulses and the
//! grids; [`model::validate_scenario`] checks it and normalizes the signal.
//! [`dynamics`] integrates the write, hold and read stages and closes an
//! energy ledger for each run. On top of the solver sit figures of merit
//! ([`metrics`]), the motional-dephasing decay model and its fit
//! ([`dephasing`]), multi-pulse readout trains ([`readout`]), and a
//! Gaussian-process optimizer for pulse parameters ([`gp`]).
//!
//! ```
//! use raman_memory::dynamics::simulate_full_protocol;
//! use raman_memory::model::{validate_scenario, ScenarioConfig};
//!
//! let mut cfg = ScenarioConfig::experiment_like();
//! cfg.optical_depth = 30.0;
//! cfg.fit_grids();
//! let r = simulate_full_protocol(&validate_scenario(cfg).unwrap()).unwrap();
//! assert!(r.ledger.closes(1e-3));
//! ```
//!
//! Units: µs and rad/µs throughout; see [`model::units`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dephasing;
pub mod dynamics;
pub mod error;
pub mod gp;
pub mod metrics;
pub mod model;
pub mod readout;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/dephasing.md")]
    mod dephasing {}
    #[doc = include_str!("../../../book/src/readout.md")]
    mod readout {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
