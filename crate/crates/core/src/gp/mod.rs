//! Gaussian-process Bayesian optimization over bounded parameter spaces.
//!
//! Parameters live in a unit box internally; [`ParamSpace`] maps it onto
//! physical bounds and expands ramp and free-bin encodings. Each iteration
//! fits a squared-exponential GP to the observed costs and evaluates the
//! candidate of largest expected improvement.

mod acquisition;
mod model;
mod optimize;
mod space;

pub use acquisition::{expected_improvement, propose_next, NEIGHBORHOOD_SCALE, N_CANDIDATES, N_NEIGHBORS};
pub use model::{GpModel, Hyperparameters, BASE_JITTER, LML_STARTS, MAX_JITTER};
pub use optimize::{failure_penalty, optimize, Observation, OptimizationResult, OptimizeOptions};
pub use space::{Assignment, Dim, Encoding, ParamSpace};

/// Point `index` of the Halton sequence in `dim` dimensions.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    primes(dim).into_iter().map(|p| radical_inverse(index, p)).collect()
}

fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

fn primes(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}
