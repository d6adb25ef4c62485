//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`; pass criterion numbers after
//! `--` to run a subset, e.g. `cargo test --test acceptance -- 2 7`.

use std::process::ExitCode;
use std::time::Instant;

use raman_memory::config::{DimConfig, FileConfig, Objective, OptimizeConfig};
use raman_memory::dephasing::{fit_decay, linspace, monte_carlo_fits, synthetic_curve, DecayParams};
use raman_memory::dynamics::{
    convergence_study, simulate_full_protocol, simulate_storage, CONVERGENCE_TOLERANCE, LEDGER_TOLERANCE,
};
use raman_memory::error::Error;
use raman_memory::gp::{optimize, Assignment, Dim, Encoding, OptimizeOptions, ParamSpace};
use raman_memory::metrics::{delay_bandwidth_product, efficiency, passive_transmission};
use raman_memory::model::units::{mhz, RB87_D1_GAMMA};
use raman_memory::model::{validate_scenario, Direction, PulseShape, Scenario, ScenarioConfig, SolverMode};
use raman_memory::readout::{estimate_extraction_ratio, run_readout_train, tune_first_extraction, ReadoutTrain};

type Check = Result<(bool, String), Error>;
type GridRun = (f64, f64, Direction, f64, f64);

fn scenario(edit: impl FnOnce(&mut ScenarioConfig)) -> Result<Scenario, Error> {
    let mut c = ScenarioConfig::experiment_like();
    edit(&mut c);
    c.fit_grids();
    Ok(validate_scenario(c)?)
}

fn passive_loss() -> Check {
    let s = scenario(|c| {
        c.optical_depth = 500.0;
        c.control_store = PulseShape::gaussian_fwhm(0.0, -5.0, 9.0);
    })?;
    let r = simulate_storage(&s)?;
    let loss = 1.0 - r.ledger.leak_energy / r.ledger.input;
    let closed_form = 1.0 - passive_transmission(500.0, RB87_D1_GAMMA, mhz(230.0));
    let ok = (loss - 0.075).abs() <= 0.003 && (loss - closed_form).abs() <= 1e-3 && loss > 0.05;
    Ok((ok, format!("loss {loss:.5}, closed form {closed_form:.5}")))
}

fn scenario_grid() -> Vec<(f64, f64, Direction)> {
    let mut out = Vec::new();
    for d in [10.0, 100.0, 300.0] {
        for ratio in [20.0, 50.0, 80.0] {
            for dir in [Direction::Forward, Direction::Backward] {
                out.push((d, ratio, dir));
            }
        }
    }
    out
}

fn grid_efficiencies() -> Result<Vec<GridRun>, Error> {
    scenario_grid()
        .into_iter()
        .map(|(d, ratio, dir)| {
            let s = scenario(|c| {
                c.optical_depth = d;
                c.delta = ratio * c.gamma;
                c.retrieval_direction = dir;
            })?;
            let r = simulate_full_protocol(&s)?;
            Ok((d, ratio, dir, efficiency(&r)?, r.ledger.closure_error().abs()))
        })
        .collect()
}

fn ledger_closure() -> Check {
    let runs = grid_efficiencies()?;
    let worst = runs.iter().map(|r| r.4).fold(0.0, f64::max);
    Ok((
        worst <= LEDGER_TOLERANCE,
        format!("{} runs, worst |input - sum| = {worst:.2e}", runs.len()),
    ))
}

fn lossless_conservation() -> Check {
    let s = scenario(|c| {
        c.gamma = 0.0;
        c.coupling_gamma = Some(RB87_D1_GAMMA);
        c.gamma0 = 0.0;
    })?;
    let store = simulate_storage(&s)?;
    let photon_loss = store.input.energy() - store.leak.energy();
    let spin_gain = store.spinwave_after_storage.excitation();
    let full = simulate_full_protocol(&s)?;
    let closure = full.ledger.closure_error().abs();
    let incoherent = full.ledger.incoherent_loss.abs();
    let transfer = (photon_loss - spin_gain).abs();
    Ok((
        closure <= 1e-3 && incoherent <= 1e-3 && transfer <= 1e-3,
        format!("closure {closure:.2e}, incoherent {incoherent:.2e}, |photon loss - spin gain| {transfer:.2e}"),
    ))
}

fn backward_beats_forward() -> Check {
    let runs = grid_efficiencies()?;
    let mut worst_gap = f64::INFINITY;
    for pair in runs.chunks(2) {
        let (fwd, back) = (&pair[0], &pair[1]);
        assert!(fwd.2 == Direction::Forward && back.2 == Direction::Backward);
        worst_gap = worst_gap.min(back.3 - fwd.3);
    }

    let mut cfg = FileConfig::experiment_like();
    cfg.optimize = Some(OptimizeConfig {
        objective: Objective::NegEfficiency,
        budget: 40,
        read_factor: None,
        dims: vec![
            dim("control_store.rabi_mhz", 1.0, 12.0),
            dim("control_read.rabi_mhz", 2.0, 24.0),
            dim("ensemble.delta2_mhz", -0.5, 0.5),
        ],
    });
    let space = cfg.param_space()?;
    let cost = |p: &[Assignment]| -> Result<f64, Error> {
        let mut c = cfg.clone();
        c.apply(p)?;
        let s = validate_scenario(c.to_scenario()?)?;
        Ok(-efficiency(&simulate_full_protocol(&s)?)?)
    };
    let best = optimize(cost, &space, OptimizeOptions::new(40, 7))?;
    let eta = -best.best_cost;
    Ok((
        worst_gap >= -1e-3 && eta >= 0.75,
        format!("min(eta_back - eta_fwd) = {worst_gap:.4} over 9 pairs; tuned eta_back at d = 300: {eta:.4}"),
    ))
}

fn dim(key: &str, lower: f64, upper: f64) -> DimConfig {
    DimConfig {
        key: key.into(),
        lower,
        upper,
        encoding: Encoding::Scalar,
    }
}

fn decay_round_trip() -> Check {
    let p = DecayParams::new(0.69, 110.0, 170.0);
    let times = linspace(200.0, 20);
    let fit = fit_decay(&synthetic_curve(&p, &times, 0.0, 0))?;
    let rel = [fit.eta0 / 0.69, fit.tau_d / 110.0, fit.tau_t / 170.0]
        .iter()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
    let fits = monte_carlo_fits(&p, &times, 0.03, 100, 1);
    let hits = fits
        .iter()
        .filter(|f| f.as_ref().is_ok_and(|f| (f.eta0 - 0.69).abs() <= 0.06))
        .count();
    Ok((
        rel <= 1e-6 && hits >= 95,
        format!("noiseless max relative error {rel:.1e}; eta0 within 0.06 in {hits}/100 noisy replicates"),
    ))
}

fn delay_bandwidth() -> Check {
    let dbp = delay_bandwidth_product(60.0, 0.36)?;
    let ok = (dbp - 166.7).abs() < 0.05 && ((dbp - 160.0) / 160.0).abs() <= 0.1;
    Ok((ok, format!("DBP {dbp:.2} vs 160")))
}

fn geometric_train() -> Check {
    let s = scenario(|_| {})?;
    let stored = simulate_storage(&s)?;
    let mut train = ReadoutTrain::uniform(PulseShape::gaussian_fwhm(mhz(1.5), -5.0, 9.0));
    train.mode_match = 0.65;
    let (tuned, first) = tune_first_extraction(&s, &train, &stored.spinwave_after_storage, 0.6)?;
    let r = run_readout_train(&s, &tuned, &stored.spinwave_after_storage)?;
    let est = estimate_extraction_ratio(&r.energies)?;
    let fractions: Vec<String> = r.fractions().iter().map(|f| format!("{f:.4}")).collect();
    Ok((
        est.max_relative_residual < 0.02 && (est.ratio - 0.6).abs() <= 0.04,
        format!(
            "first extraction {first:.4}, fractions [{}], fitted r = {:.4} +/- {:.4}, max relative residual {:.4}",
            fractions.join(", "),
            est.ratio,
            est.stderr,
            est.max_relative_residual
        ),
    ))
}

fn optimizer_regression() -> Check {
    let space = ParamSpace::new(vec![Dim::scalar("x", 0.0, 1.0)])?;
    let f = |x: f64| (x - 0.3).powi(2);
    let oracle = (0..=100_000)
        .map(|k| k as f64 / 100_000.0)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("non-empty grid");
    let cost = |p: &[Assignment]| Ok::<_, Error>(f(p[0].values[0]));
    let a = optimize(cost, &space, OptimizeOptions::new(25, 11))?;
    let b = optimize(cost, &space, OptimizeOptions::new(25, 11))?;
    let bytes = |r: &raman_memory::gp::OptimizationResult| serde_json::to_vec(&r.history).expect("serializes");
    let x = a.best_params[0].values[0];
    let identical = bytes(&a) == bytes(&b);
    Ok((
        (x - oracle).abs() <= 0.02 && identical,
        format!("best x {x:.4} vs brute-force {oracle:.4}; identical histories: {identical}"),
    ))
}

fn convergence() -> Check {
    let table = convergence_study(&scenario(|_| {})?, 1)?;
    let drift = table.last_drift();
    let mode = |m: SolverMode| -> Result<f64, Error> {
        let s = scenario(|c| {
            c.optical_depth = 50.0;
            c.delta = 20.0 * c.gamma;
            c.solver_mode = m;
        })?;
        efficiency(&simulate_full_protocol(&s)?)
    };
    let (full, adiabatic) = (mode(SolverMode::Full)?, mode(SolverMode::Adiabatic)?);
    let gap = (full - adiabatic).abs();
    Ok((
        drift < CONVERGENCE_TOLERANCE && gap <= 0.01,
        format!("doubling drift {drift:.2e}; full {full:.4} vs adiabatic {adiabatic:.4} at d = 50, delta = 20 gamma"),
    ))
}

struct Criterion {
    number: usize,
    title: &'static str,
    limit_s: f64,
    run: fn() -> Check,
}

const CRITERIA: [Criterion; 9] = [
    Criterion {
        number: 1,
        title: "passive loss at d = 500",
        limit_s: 10.0,
        run: passive_loss,
    },
    Criterion {
        number: 2,
        title: "ledger closure on 18 scenarios",
        limit_s: 300.0,
        run: ledger_closure,
    },
    Criterion {
        number: 3,
        title: "lossless conservation",
        limit_s: 30.0,
        run: lossless_conservation,
    },
    Criterion {
        number: 4,
        title: "backward at least forward",
        limit_s: 900.0,
        run: backward_beats_forward,
    },
    Criterion {
        number: 5,
        title: "decay-model round trip",
        limit_s: 60.0,
        run: decay_round_trip,
    },
    Criterion {
        number: 6,
        title: "delay-bandwidth product",
        limit_s: 1.0,
        run: delay_bandwidth,
    },
    Criterion {
        number: 7,
        title: "geometric readout train",
        limit_s: 120.0,
        run: geometric_train,
    },
    Criterion {
        number: 8,
        title: "optimizer regression",
        limit_s: 30.0,
        run: optimizer_regression,
    },
    Criterion {
        number: 9,
        title: "grid and model convergence",
        limit_s: 600.0,
        run: convergence,
    },
];

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for c in CRITERIA
        .iter()
        .filter(|c| wanted.is_empty() || wanted.contains(&c.number))
    {
        let clock = Instant::now();
        let outcome = (c.run)();
        let elapsed = clock.elapsed().as_secs_f64();
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        let pass = ok && elapsed < c.limit_s;
        println!(
            "criterion {} {}: {} ({detail}; {elapsed:.1} s of {} s)",
            c.number,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            c.limit_s
        );
        ran += 1;
        if !pass {
            failed.push(c.number);
        }
    }
    println!("{} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
