use std::fmt;

use thiserror::Error;

/// A single violated invariant, tagged with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every invariant violation found while checking a configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationError {
    pub errors: Vec<FieldError>,
}

impl ValidationError {
    pub fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        let mut v = Self::default();
        v.push(field, message);
        v
    }

    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// True if any error names `field` (exact match or as a dotted prefix).
    pub fn mentions(&self, field: &str) -> bool {
        self.errors
            .iter()
            .any(|e| e.field == field || e.field.ends_with(&format!(".{field}")))
    }

    pub(crate) fn into_result(self) -> Result<(), Self> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.errors.iter().map(ToString::to_string).collect();
        write!(f, "invalid configuration: {}", msgs.join("; "))
    }
}

impl std::error::Error for ValidationError {}

/// Numerical failure inside the Maxwell-Bloch integrator.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("non-finite state at time step {step} of {n_t} (n_z = {n_z}, t = {time} us)")]
pub struct SolverError {
    pub n_z: usize,
    pub n_t: usize,
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FitError {
    #[error("invalid fit data: {0}")]
    InvalidData(String),
    #[error("fit did not converge after {starts} starts (best cost {best_cost:e})")]
    NotConverged { starts: usize, best_cost: f64 },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("fewer than two distinct training inputs")]
    TooFewPoints,
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("covariance matrix not positive definite even with jitter {jitter:e}")]
    Singular { jitter: f64 },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpaceError {
    #[error("parameter space is empty")]
    Empty,
    #[error("dimension `{name}`: {message}")]
    InvalidDim { name: String, message: String },
    #[error("unit-box coordinate {index} = {value} outside [0, 1]")]
    OutOfBox { index: usize, value: f64 },
    #[error("expected {expected} unit-box coordinates, got {got}")]
    Length { expected: usize, got: usize },
    #[error("budget {budget} smaller than initial design size {initial}")]
    Budget { budget: usize, initial: usize },
}

/// Top-level error for operations that chain validation, simulation and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("all {evaluations} cost evaluations failed")]
    NoSuccessfulEvaluation { evaluations: usize },
    #[error("missing retrieved trace")]
    MissingRetrieval,
    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
