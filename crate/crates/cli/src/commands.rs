use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use raman_memory::config::{FileConfig, Objective};
use raman_memory::dephasing::{fit_decay_with, DecayFit, DecayPoint, FitOptions};
use raman_memory::dynamics::{
    convergence_study, simulate_full_protocol, simulate_storage, EnergyLedger, FieldTrace, SimulationResult, SpinWave,
    CONVERGENCE_TOLERANCE, LEDGER_TOLERANCE,
};
use raman_memory::error::{Error, SpaceError, ValidationError};
use raman_memory::gp::{optimize, Assignment, OptimizeOptions};
use raman_memory::metrics::{efficiency, MemoryFigures};
use raman_memory::model::units::to_mhz;
use raman_memory::model::{validate_scenario, Scenario, WidthConvention};
use raman_memory::readout::{estimate_extraction_ratio, run_readout_train, tune_first_extraction};

use crate::output::{header, OutputDir, RunManifest, MANIFEST_FILE};
use crate::{Cli, Command};

/// Width convention of the delay-bandwidth product reported by `run`.
pub const DBP_CONVENTION: WidthConvention = WidthConvention::FullWidth1OverE2;

pub fn dispatch(cli: &Cli) -> Result<()> {
    let clock = Instant::now();
    let started_utc = chrono::Utc::now();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::from(ValidationError::single("workers", "must be at least 1")).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    let mut cfg = load_config(cli)?;
    if let Some(d) = cli.direction {
        cfg.protocol.direction = d.into();
    }
    if let Some(s) = cli.solver {
        cfg.protocol.solver = s.into();
    }

    let root = cli.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!(
            "{}-{}",
            cli.command.name(),
            started_utc.format("%Y%m%dT%H%M%S%.3fZ")
        ))
    });
    let mut dir = OutputDir::create(root)?;
    let outcome = match &cli.command {
        Command::Run => cmd_run(&cfg, cli.seed, &mut dir),
        Command::SweepLifetime { times } => cmd_sweep_lifetime(&cfg, times.as_deref(), cli.seed, &mut dir),
        Command::Optimize { budget } => cmd_optimize(&cfg, *budget, cli.seed, &mut dir),
        Command::Splitter => cmd_splitter(&cfg, cli.seed, &mut dir),
        Command::Converge { doublings } => cmd_converge(&cfg, *doublings, cli.seed, &mut dir),
    };

    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        resolved_config: cfg.to_toml(),
        output_directory: dir.path().display().to_string(),
        seed: cli.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        started_utc: started_utc.to_rfc3339(),
        workers: rayon::current_num_threads(),
        arguments: std::env::args().collect(),
        files: dir.files().to_vec(),
    };
    dir.write_json(MANIFEST_FILE, &manifest)?;
    outcome
}

fn load_config(cli: &Cli) -> Result<FileConfig> {
    match &cli.config {
        None => Ok(FileConfig::experiment_like()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
            Ok(FileConfig::parse(&text)?)
        }
    }
}

fn scenario(cfg: &FileConfig) -> Result<Scenario, Error> {
    Ok(validate_scenario(cfg.to_scenario()?)?)
}

/// Storage time after which `η` has fallen to `1/e` of its zero-time value,
/// from spin decay and the dephasing model. `None` without any decay.
fn decay_time(s: &Scenario) -> Option<f64> {
    if s.gamma0 == 0.0 && s.dephasing.is_none() {
        return None;
    }
    let rel = |t: f64| (-2.0 * s.gamma0 * t).exp() * s.dephasing.map_or(1.0, |p| p.shape(t));
    let target = (-1.0f64).exp();
    let mut hi = 1.0;
    while rel(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rel(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    direction: &'static str,
    solver: &'static str,
    efficiency: f64,
    ledger: EnergyLedger,
    ledger_closure_error: f64,
    ledger_closes: bool,
    decay_time_us: Option<f64>,
    figures: MemoryFigures,
}

fn cmd_run(cfg: &FileConfig, seed: u64, dir: &mut OutputDir) -> Result<()> {
    let s = scenario(cfg)?;
    let r = simulate_full_protocol(&s)?;
    write_traces(dir, &s, &r)?;
    write_spinwave(dir, "spinwave.csv", &r.spinwave_after_storage)?;
    write_spinwave(dir, "spinwave_final.csv", &r.spinwave_final)?;
    dir.write_json("ledger.json", &r.ledger)?;

    let decay = decay_time(&s);
    let mut figures = MemoryFigures::from_result(&s, &r)?;
    if let Some(t) = decay {
        figures = figures.with_dbp(&s, t, DBP_CONVENTION).unwrap_or(figures);
    }
    let summary = RunSummary {
        seed,
        direction: s.retrieval_direction.label(),
        solver: s.solver_mode.label(),
        efficiency: figures.efficiency,
        ledger_closure_error: r.ledger.closure_error(),
        ledger_closes: r.ledger.closes(LEDGER_TOLERANCE),
        ledger: r.ledger,
        decay_time_us: decay,
        figures,
    };
    dir.write_json("summary.json", &summary)
}

/// Leak rows on the storage clock, then retrieved rows shifted by the
/// storage time (read clock zero sits one storage time after signal zero).
fn write_traces(dir: &mut OutputDir, s: &Scenario, r: &SimulationResult) -> Result<()> {
    let cells = |tr: &FieldTrace, shift: f64, leak: bool| -> Vec<Vec<Option<f64>>> {
        tr.times
            .iter()
            .zip(&tr.values)
            .map(|(t, v)| {
                let (a, b) = (Some(v.re), Some(v.im));
                if leak {
                    vec![Some(t + shift), a, b, None, None]
                } else {
                    vec![Some(t + shift), None, None, a, b]
                }
            })
            .collect()
    };
    let mut rows = cells(&r.leak, 0.0, true);
    rows.extend(cells(&r.retrieved, s.storage_time, false));
    dir.write_csv(
        "traces.csv",
        &header(&["time_us", "re_leak", "im_leak", "re_retrieved", "im_retrieved"]),
        &rows,
    )
}

fn write_spinwave(dir: &mut OutputDir, name: &str, sw: &SpinWave) -> Result<()> {
    let rows: Vec<Vec<Option<f64>>> = sw
        .zeta
        .iter()
        .zip(&sw.values)
        .map(|(z, v)| vec![Some(*z), Some(v.re), Some(v.im)])
        .collect();
    dir.write_csv(name, &header(&["zeta", "re_s", "im_s"]), &rows)
}

#[derive(Serialize)]
struct FitReport {
    seed: u64,
    weighted: bool,
    fit: Option<DecayFit>,
    error: Option<String>,
}

fn cmd_sweep_lifetime(cfg: &FileConfig, times: Option<&[f64]>, seed: u64, dir: &mut OutputDir) -> Result<()> {
    let times: Vec<f64> = match times {
        Some(t) => t.to_vec(),
        None => cfg
            .sweep
            .as_ref()
            .map(|s| s.storage_times_us.clone())
            .unwrap_or_default(),
    };
    if times.is_empty() {
        return Err(Error::from(ValidationError::single(
            "sweep.storage_times_us",
            "need at least one storage time (or pass --times)",
        ))
        .into());
    }
    let weighted = cfg.sweep.as_ref().is_some_and(|s| s.weighted);
    let base = scenario(cfg)?;
    let points = times
        .par_iter()
        .map(|&t| -> Result<DecayPoint, Error> {
            let mut c = base.config().clone();
            c.storage_time = t;
            let s = validate_scenario(c)?;
            let r = simulate_full_protocol(&s)?;
            Ok(DecayPoint {
                t_us: t,
                efficiency: efficiency(&r)?,
                sigma: 0.0,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let rows: Vec<Vec<Option<f64>>> = points
        .iter()
        .map(|p| vec![Some(p.t_us), Some(p.efficiency), Some(p.sigma)])
        .collect();
    dir.write_csv("decay.csv", &header(&["t_us", "efficiency", "sigma"]), &rows)?;

    let opts = FitOptions {
        weighted,
        ..FitOptions::default()
    };
    match fit_decay_with(&points, opts) {
        Ok(fit) => dir.write_json(
            "fit.json",
            &FitReport {
                seed,
                weighted,
                fit: Some(fit),
                error: None,
            },
        ),
        Err(e) => {
            dir.write_json(
                "fit.json",
                &FitReport {
                    seed,
                    weighted,
                    fit: None,
                    error: Some(e.to_string()),
                },
            )?;
            Err(Error::from(e)).context("decay curve written to decay.csv, but the fit failed")
        }
    }
}

#[derive(Serialize)]
struct BestReport {
    seed: u64,
    objective: Objective,
    budget: usize,
    best_cost: f64,
    baseline_cost: f64,
    failed_evaluations: usize,
    params: Vec<Assignment>,
}

fn objective_cost(cfg: &FileConfig, objective: Objective) -> Result<f64, Error> {
    let s = scenario(cfg)?;
    let r = simulate_full_protocol(&s)?;
    Ok(match objective {
        Objective::Leakage => r.ledger.leak_energy / r.ledger.input,
        Objective::NegEfficiency => -efficiency(&r)?,
    })
}

fn cmd_optimize(cfg: &FileConfig, budget: Option<usize>, seed: u64, dir: &mut OutputDir) -> Result<()> {
    let space = cfg.param_space()?;
    let section = cfg.optimize.as_ref().expect("param_space checked the section");
    let opts = OptimizeOptions::new(budget.unwrap_or(section.budget), seed);
    let initial = opts.initial_size(&space);
    if opts.budget < initial {
        return Err(Error::from(SpaceError::Budget {
            budget: opts.budget,
            initial,
        })
        .into());
    }
    let objective = section.objective;
    let baseline_cost = objective_cost(cfg, objective).context("evaluating the unmodified config")?;
    let result = optimize(
        |p: &[Assignment]| {
            let mut c = cfg.clone();
            c.apply(p)?;
            objective_cost(&c, objective)
        },
        &space,
        opts,
    )?;

    let mut cols = vec!["iteration".to_string()];
    cols.extend(space.coordinate_names());
    cols.extend(header(&["cost", "incumbent_cost", "seed", "failed"]));
    let owners: Vec<_> = space
        .dims
        .iter()
        .flat_map(|d| std::iter::repeat_n((d.lower, d.upper), d.encoding.width()))
        .collect();
    let rows: Vec<Vec<Option<f64>>> = result
        .history
        .iter()
        .map(|o| {
            let mut row = vec![Some(o.iteration as f64)];
            row.extend(o.x.iter().zip(&owners).map(|(u, (lo, hi))| Some(lo + u * (hi - lo))));
            row.extend([
                Some(o.cost),
                Some(o.incumbent_cost),
                Some(seed as f64),
                Some(if o.failure.is_some() { 1.0 } else { 0.0 }),
            ]);
            row
        })
        .collect();
    dir.write_csv("history.csv", &cols, &rows)?;

    let mut best = cfg.clone();
    best.apply(&result.best_params).map_err(Error::from)?;
    dir.write_text("best_config.toml", &best.to_toml())?;
    dir.write_json(
        "best.json",
        &BestReport {
            seed,
            objective,
            budget: opts.budget,
            best_cost: result.best_cost,
            baseline_cost,
            failed_evaluations: result.history.iter().filter(|o| o.failure.is_some()).count(),
            params: result.best_params,
        },
    )
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    n_pulses: usize,
    r: Option<f64>,
    stderr: Option<f64>,
    max_relative_residual: Option<f64>,
    estimate_error: Option<String>,
    /// Fraction of the mode-matched excitation recovered by each readout.
    fractions: Vec<f64>,
    /// Readout energies per unit input energy.
    energies: Vec<f64>,
    stored_fraction: f64,
    unmatched_fraction: f64,
    residual_fraction: f64,
    read_rabi_mhz: f64,
    tuned_first_extraction: Option<f64>,
}

fn cmd_splitter(cfg: &FileConfig, seed: u64, dir: &mut OutputDir) -> Result<()> {
    let section = cfg
        .train
        .as_ref()
        .ok_or_else(|| Error::from(ValidationError::single("train", "section missing")))?;
    let s = scenario(cfg)?;
    let mut train = section.to_train().map_err(Error::from)?;
    train.validate().map_err(Error::from)?;
    let stored = simulate_storage(&s).map_err(Error::from)?;
    let input = stored.ledger.input;
    let sw = stored.spinwave_after_storage;
    let mut tuned = None;
    if let Some(target) = section.target_extraction {
        let (t, reached) = tune_first_extraction(&s, &train, &sw, target)?;
        train = t;
        tuned = Some(reached);
    }
    let r = run_readout_train(&s, &train, &sw)?;
    let energies: Vec<f64> = r.energies.iter().map(|e| e / input).collect();
    let rows: Vec<Vec<Option<f64>>> = energies
        .iter()
        .zip(r.cumulative())
        .enumerate()
        .map(|(k, (e, c))| vec![Some(k as f64), Some(*e), Some(c)])
        .collect();
    dir.write_csv(
        "train.csv",
        &header(&["pulse_index", "energy", "cumulative_fraction"]),
        &rows,
    )?;

    let est = estimate_extraction_ratio(&r.energies);
    let summary = TrainSummary {
        seed,
        n_pulses: train.n_pulses,
        r: est.as_ref().ok().map(|e| e.ratio),
        stderr: est.as_ref().ok().map(|e| e.stderr),
        max_relative_residual: est.as_ref().ok().map(|e| e.max_relative_residual),
        estimate_error: est.as_ref().err().map(ToString::to_string),
        fractions: r.fractions(),
        energies,
        stored_fraction: r.stored / input,
        unmatched_fraction: r.unmatched / input,
        residual_fraction: r.residual / input,
        read_rabi_mhz: to_mhz(train.pulse.amplitude),
        tuned_first_extraction: tuned,
    };
    dir.write_json("summary.json", &summary)
}

#[derive(Serialize)]
struct ConvergenceSummary {
    seed: u64,
    converged: bool,
    tolerance: f64,
    first_drift: f64,
    last_drift: f64,
}

fn cmd_converge(cfg: &FileConfig, doublings: usize, seed: u64, dir: &mut OutputDir) -> Result<()> {
    let s = scenario(cfg)?;
    let table = convergence_study(&s, doublings)?;
    let rows: Vec<Vec<Option<f64>>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                Some(r.n_z as f64),
                Some(r.n_t as f64),
                Some(r.read_n_t as f64),
                Some(r.efficiency),
                Some(r.leak),
            ]
        })
        .collect();
    dir.write_csv(
        "convergence.csv",
        &header(&["n_z", "n_t", "read_n_t", "efficiency", "leak"]),
        &rows,
    )?;
    if !table.converged {
        eprintln!(
            "warning: efficiency still changes by {:.3e} at the finest level",
            table.last_drift()
        );
    }
    dir.write_json(
        "summary.json",
        &ConvergenceSummary {
            seed,
            converged: table.converged,
            tolerance: CONVERGENCE_TOLERANCE,
            first_drift: table.first_drift(),
            last_drift: table.last_drift(),
        },
    )
}
