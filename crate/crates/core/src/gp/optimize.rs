use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, SpaceError};
use crate::gp::{halton, propose_next, Assignment, GpModel, ParamSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Total cost evaluations, including the initial design.
    pub budget: usize,
    pub seed: u64,
    /// Initial quasi-random design size; `None` means `2·dim + 1`.
    pub initial: Option<usize>,
}

impl OptimizeOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            initial: None,
        }
    }

    pub fn initial_size(&self, space: &ParamSpace) -> usize {
        self.initial.unwrap_or(2 * space.dimension() + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub iteration: usize,
    /// Unit-box coordinates.
    pub x: Vec<f64>,
    /// Cost used by the model (penalized when the evaluation failed).
    pub cost: f64,
    /// Best cost seen up to and including this iteration.
    pub incumbent_cost: f64,
    /// Error message of a failed evaluation.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_x: Vec<f64>,
    pub best_params: Vec<Assignment>,
    pub best_cost: f64,
    pub history: Vec<Observation>,
    pub seed: u64,
}

/// Cost assigned to failed evaluations: `worst + |worst|` over the
/// successful ones so far (1 when there are none).
pub fn failure_penalty(costs: impl IntoIterator<Item = f64>) -> f64 {
    let worst = costs.into_iter().fold(f64::NEG_INFINITY, f64::max);
    if worst.is_finite() {
        worst + worst.abs()
    } else {
        1.0
    }
}

/// Decorrelated per-iteration seed for the acquisition candidates.
fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed ^ (iteration as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Minimize `cost_fn` over `space` by GP-guided search.
///
/// The initial design is evaluated in parallel; the proposal loop is
/// sequential. Failed evaluations are recorded with a penalty cost and the
/// loop carries on.
pub fn optimize<F, E>(cost_fn: F, space: &ParamSpace, opts: OptimizeOptions) -> Result<OptimizationResult, Error>
where
    F: Fn(&[Assignment]) -> Result<f64, E> + Sync,
    E: std::fmt::Display,
{
    let dim = space.dimension();
    let initial = opts.initial_size(space);
    if opts.budget < initial || initial == 0 {
        return Err(SpaceError::Budget {
            budget: opts.budget,
            initial,
        }
        .into());
    }
    let eval = |x: &[f64]| -> Result<Result<f64, String>, Error> {
        let params = space.encode(x)?;
        Ok(match cost_fn(&params) {
            Ok(c) if c.is_finite() => Ok(c),
            Ok(c) => Err(format!("non-finite cost {c}")),
            Err(e) => Err(e.to_string()),
        })
    };

    let shift: Vec<f64> = halton(opts.seed as usize % 9973 + 1, dim);
    let design: Vec<Vec<f64>> = (1..=initial)
        .map(|k| {
            halton(k, dim)
                .iter()
                .zip(&shift)
                .map(|(u, s)| (u + s).fract())
                .collect()
        })
        .collect();
    let outcomes: Vec<Result<f64, String>> = design.par_iter().map(|x| eval(x)).collect::<Result<_, Error>>()?;

    let mut xs = design;
    let mut raw = outcomes;
    while xs.len() < opts.budget {
        let iteration = xs.len();
        let costs = model_costs(&raw);
        let next = match GpModel::fit(&xs, &costs) {
            Ok(model) => propose_next(&model, iteration_seed(opts.seed, iteration)),
            Err(_) => halton(iteration + 1, dim)
                .iter()
                .zip(&shift)
                .map(|(u, s)| (u + s).fract())
                .collect(),
        };
        raw.push(eval(&next)?);
        xs.push(next);
    }

    let costs = model_costs(&raw);
    let mut history = Vec::with_capacity(xs.len());
    let mut best: Option<usize> = None;
    for (i, (x, c)) in xs.iter().zip(&costs).enumerate() {
        if raw[i].is_ok() && best.is_none_or(|b| *c < costs[b]) {
            best = Some(i);
        }
        history.push(Observation {
            iteration: i,
            x: x.clone(),
            cost: *c,
            incumbent_cost: best.map_or(f64::INFINITY, |b| costs[b]),
            failure: raw[i].as_ref().err().cloned(),
        });
    }
    let b = best.ok_or(Error::NoSuccessfulEvaluation { evaluations: xs.len() })?;
    Ok(OptimizationResult {
        best_params: space.encode(&xs[b])?,
        best_x: xs[b].clone(),
        best_cost: costs[b],
        history,
        seed: opts.seed,
    })
}

fn model_costs(raw: &[Result<f64, String>]) -> Vec<f64> {
    let penalty = failure_penalty(raw.iter().filter_map(|r| r.as_ref().ok().copied()));
    raw.iter().map(|r| *r.as_ref().unwrap_or(&penalty)).collect()
}
