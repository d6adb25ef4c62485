//! TOML scenario files.
//!
//! Keys carry their units: `_mhz` values are ordinary frequencies and are
//! multiplied by 2π on parsing, `_us` values are microseconds. Rabi
//! frequencies are given as `rabi_mhz = Ω/2π`.

use serde::{Deserialize, Serialize};

use crate::dephasing::DecayParams;
use crate::error::{Error, ValidationError};
use crate::gp::{Assignment, Dim, Encoding, ParamSpace};
use crate::model::units::{mhz, to_mhz, RB87_D1_GAMMA};
use crate::model::{
    Direction, Envelope, GridSpec, PulseShape, PulseWidth, SampledEnvelope, ScenarioConfig, SolverMode,
    WidthConvention, DEFAULT_READ_AMPLITUDE_FACTOR,
};
use crate::readout::{default_spacing, ReadoutTrain, DEFAULT_TRAIN_PULSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub optical_depth: f64,
    #[serde(default = "default_gamma_mhz")]
    pub gamma_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_gamma_mhz: Option<f64>,
    #[serde(default)]
    pub gamma0_mhz: f64,
    pub delta_mhz: f64,
    #[serde(default)]
    pub delta2_mhz: f64,
    /// rad per ensemble length.
    #[serde(default)]
    pub kmis: f64,
}

fn default_gamma_mhz() -> f64 {
    to_mhz(RB87_D1_GAMMA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    /// Peak Rabi frequency Ω/2π. Ignored for the signal, which is
    /// normalized to unit energy.
    #[serde(default)]
    pub rabi_mhz: f64,
    #[serde(default)]
    pub center_us: f64,
    pub width_us: f64,
    #[serde(default = "default_convention")]
    pub width_convention: WidthConvention,
    /// Relative envelope values at equally spaced times across
    /// `[bins_start_us, bins_end_us]`, linearly interpolated. When present
    /// they replace the Gaussian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins_start_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins_end_us: Option<f64>,
}

fn default_convention() -> WidthConvention {
    WidthConvention::FwhmIntensity
}

impl PulseConfig {
    pub fn gaussian(rabi_mhz: f64, center_us: f64, width_us: f64) -> Self {
        Self {
            rabi_mhz,
            center_us,
            width_us,
            width_convention: default_convention(),
            bins: None,
            bins_start_us: None,
            bins_end_us: None,
        }
    }

    pub fn to_pulse(&self, field: &str, errs: &mut ValidationError) -> PulseShape {
        let amplitude = mhz(self.rabi_mhz);
        match &self.bins {
            None => PulseShape {
                amplitude,
                envelope: Envelope::Gaussian {
                    center: self.center_us,
                    width: PulseWidth {
                        value: self.width_us,
                        convention: self.width_convention,
                    },
                },
            },
            Some(bins) => {
                let a = self.bins_start_us.unwrap_or(self.center_us - self.width_us);
                let b = self.bins_end_us.unwrap_or(self.center_us + self.width_us);
                if bins.len() < 2 || !(b > a) {
                    errs.push(
                        format!("{field}.bins"),
                        "need at least 2 bins over an interval of positive length",
                    );
                    return PulseShape::zero();
                }
                PulseShape {
                    amplitude,
                    envelope: Envelope::Samples(SampledEnvelope {
                        t0: a,
                        dt: (b - a) / (bins.len() - 1) as f64,
                        values: bins.clone(),
                    }),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default)]
    pub storage_time_us: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "yes")]
    pub mirror_read_detuning: bool,
    #[serde(default = "default_solver")]
    pub solver: SolverMode,
}

fn default_direction() -> Direction {
    Direction::Backward
}

fn default_solver() -> SolverMode {
    SolverMode::Adiabatic
}

fn yes() -> bool {
    true
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            storage_time_us: 0.0,
            direction: default_direction(),
            mirror_read_detuning: true,
            solver: default_solver(),
        }
    }
}

/// A time window; omitted bounds are derived from the pulses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_z: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
}

impl GridConfig {
    fn is_explicit(&self) -> bool {
        self.t_start_us.is_some() && self.t_end_us.is_some() && self.n_t.is_some()
    }

    fn partially_set(&self) -> bool {
        !self.is_explicit() && (self.t_start_us.is_some() || self.t_end_us.is_some() || self.n_t.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingConfig {
    pub eta0: f64,
    pub tau_d_us: f64,
    pub tau_t_us: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub storage_times_us: Vec<f64>,
    #[serde(default)]
    pub weighted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Leakage fraction of the write stage.
    Leakage,
    /// Minus the total efficiency of the full protocol.
    NegEfficiency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimConfig {
    /// Dotted path of the config value, e.g. `control_store.rabi_mhz`.
    pub key: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "scalar")]
    pub encoding: Encoding,
}

fn scalar() -> Encoding {
    Encoding::Scalar
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub objective: Objective,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Keep the read control at this multiple of the write control's peak
    /// while the write control is varied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_factor: Option<f64>,
    pub dims: Vec<DimConfig>,
}

fn default_budget() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_train_pulses")]
    pub n_pulses: usize,
    #[serde(default = "one")]
    pub mode_match: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_us: Option<f64>,
    #[serde(default)]
    pub decay_between: bool,
    /// When set, the pulse amplitude is tuned so that the first readout
    /// extracts this fraction of the matched excitation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_extraction: Option<f64>,
    pub pulse: PulseConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<PulseOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseOverride {
    pub index: usize,
    pub pulse: PulseConfig,
}

fn default_train_pulses() -> usize {
    DEFAULT_TRAIN_PULSES
}

fn one() -> f64 {
    1.0
}

impl TrainConfig {
    pub fn to_train(&self) -> Result<ReadoutTrain, ValidationError> {
        let mut errs = ValidationError::default();
        let pulse = self.pulse.to_pulse("train.pulse", &mut errs);
        let mut overrides = vec![None; self.n_pulses];
        for o in &self.overrides {
            if o.index >= self.n_pulses {
                errs.push(
                    "train.overrides.index",
                    format!("{} >= n_pulses {}", o.index, self.n_pulses),
                );
                continue;
            }
            overrides[o.index] = Some(o.pulse.to_pulse("train.overrides.pulse", &mut errs));
        }
        errs.into_result()?;
        let train = ReadoutTrain {
            n_pulses: self.n_pulses,
            spacing: self.spacing_us.unwrap_or_else(|| default_spacing(&pulse)),
            pulse,
            mode_match: self.mode_match,
            overrides,
            decay_between: self.decay_between,
        };
        train.validate().map_err(|e| prefix(e, "train"))?;
        Ok(train)
    }
}

/// Complete file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub ensemble: EnsembleConfig,
    pub signal: PulseConfig,
    pub control_store: PulseConfig,
    /// Defaults to the write control at twice its peak.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_read: Option<PulseConfig>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub read_grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dephasing: Option<DephasingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

fn prefix(mut e: ValidationError, p: &str) -> ValidationError {
    for f in &mut e.errors {
        f.field = format!("{p}.{}", f.field);
    }
    e
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The built-in experiment-like scenario as a file.
    pub fn experiment_like() -> Self {
        Self {
            ensemble: EnsembleConfig {
                optical_depth: 300.0,
                gamma_mhz: default_gamma_mhz(),
                coupling_gamma_mhz: None,
                gamma0_mhz: 0.0,
                delta_mhz: 230.0,
                delta2_mhz: 0.0,
                kmis: 0.0,
            },
            signal: PulseConfig::gaussian(0.0, 0.0, 5.0),
            control_store: PulseConfig::gaussian(4.0, -5.0, 9.0),
            control_read: None,
            protocol: ProtocolConfig {
                storage_time_us: 5.0,
                ..Default::default()
            },
            grid: GridConfig::default(),
            read_grid: GridConfig::default(),
            dephasing: None,
            sweep: None,
            optimize: None,
            train: None,
        }
    }

    /// Read control after defaulting: the write control's shape at
    /// twice its peak, in the read window's own clock.
    pub fn read_control(&self) -> PulseConfig {
        self.control_read.clone().unwrap_or_else(|| PulseConfig {
            rabi_mhz: self.control_store.rabi_mhz * DEFAULT_READ_AMPLITUDE_FACTOR,
            ..self.control_store.clone()
        })
    }

    /// Convert to a scenario (not yet validated). Grids without explicit
    /// bounds are sized from the pulses.
    pub fn to_scenario(&self) -> Result<ScenarioConfig, ValidationError> {
        let mut errs = ValidationError::default();
        let e = &self.ensemble;
        let signal = self.signal.to_pulse("signal", &mut errs);
        let signal = signal.with_amplitude(1.0);
        let control_store = self.control_store.to_pulse("control_store", &mut errs);
        let control_read = self.read_control().to_pulse("control_read", &mut errs);
        for (name, g) in [("grid", &self.grid), ("read_grid", &self.read_grid)] {
            if g.partially_set() {
                errs.push(name, "give all of t_start_us, t_end_us and n_t, or none");
            }
        }
        errs.into_result()?;

        let n_z = self.grid.n_z.unwrap_or(crate::model::grid::DEFAULT_N_Z);
        let explicit = |g: &GridConfig, n_z: usize| {
            GridSpec::new(
                g.n_z.unwrap_or(n_z),
                g.t_start_us.unwrap_or(0.0),
                g.t_end_us.unwrap_or(1.0),
                g.n_t.unwrap_or(2),
            )
        };
        let mut s = ScenarioConfig {
            optical_depth: e.optical_depth,
            gamma: mhz(e.gamma_mhz),
            coupling_gamma: e.coupling_gamma_mhz.map(mhz),
            gamma0: mhz(e.gamma0_mhz),
            delta: mhz(e.delta_mhz),
            delta2: mhz(e.delta2_mhz),
            kmis: e.kmis,
            signal,
            control_store,
            control_read,
            storage_time: self.protocol.storage_time_us,
            retrieval_direction: self.protocol.direction,
            mirror_read_detuning: self.protocol.mirror_read_detuning,
            grid: explicit(&self.grid, n_z),
            read_grid: explicit(&self.read_grid, self.read_grid.n_z.unwrap_or(n_z)),
            solver_mode: self.protocol.solver,
            dephasing: self
                .dephasing
                .as_ref()
                .map(|d| DecayParams::new(d.eta0, d.tau_d_us, d.tau_t_us)),
        };
        if !self.grid.is_explicit() {
            let read = s.read_grid;
            s.fit_grids();
            if self.read_grid.is_explicit() {
                s.read_grid = read;
            }
        } else if !self.read_grid.is_explicit() {
            let rg = s.read_grid_for(&s.control_read);
            s.read_grid = GridSpec { n_z: s.grid.n_z, ..rg };
        }
        Ok(s)
    }

    /// Set a dotted-path numeric value, e.g. `control_store.rabi_mhz`.
    /// Keys ending in `bins` take a list; other keys take one value.
    pub fn set_path(&mut self, path: &str, values: &[f64]) -> Result<(), ValidationError> {
        let bad = |m: String| ValidationError::single(path, m);
        let mut probe = self.clone();
        if path.starts_with("control_read.") && probe.control_read.is_none() {
            probe.control_read = Some(probe.read_control());
        }
        let mut root = toml::Value::try_from(&probe).map_err(|e| bad(e.to_string()))?;
        let parts: Vec<&str> = path.split('.').collect();
        let table = root.as_table_mut().ok_or_else(|| bad("config is not a table".into()))?;
        set_in(table, &parts, values).map_err(bad)?;
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| bad(e.message().to_string()))?;
        Ok(())
    }

    /// Apply a decoded optimizer point.
    pub fn apply(&mut self, params: &[Assignment]) -> Result<(), ValidationError> {
        for p in params {
            self.set_path(&p.name, &p.values)?;
        }
        if let Some(factor) = self.optimize.as_ref().and_then(|o| o.read_factor) {
            let mut read = self.read_control();
            read.rabi_mhz = self.control_store.rabi_mhz * factor;
            self.control_read = Some(read);
        }
        Ok(())
    }

    /// Search space of the `[optimize]` section; every key must resolve.
    pub fn param_space(&self) -> Result<ParamSpace, Error> {
        let opt = self
            .optimize
            .as_ref()
            .ok_or_else(|| ValidationError::single("optimize", "section missing"))?;
        let dims: Vec<Dim> = opt
            .dims
            .iter()
            .map(|d| Dim {
                name: d.key.clone(),
                lower: d.lower,
                upper: d.upper,
                encoding: d.encoding,
            })
            .collect();
        let space = ParamSpace::new(dims)?;
        let mut probe = self.clone();
        let mid = vec![0.5; space.dimension()];
        probe
            .apply(&space.encode(&mid)?)
            .map_err(|e| prefix(e, "optimize.dims"))?;
        Ok(space)
    }
}

fn set_in(table: &mut toml::Table, parts: &[&str], values: &[f64]) -> Result<(), String> {
    let (head, rest) = parts.split_first().ok_or("empty key")?;
    if !rest.is_empty() {
        return match table.get_mut(*head) {
            Some(toml::Value::Table(t)) => set_in(t, rest, values),
            Some(_) => Err(format!("`{head}` is not a section")),
            None => Err(format!("no section `{head}`")),
        };
    }
    let value = if head.ends_with("bins") {
        toml::Value::Array(values.iter().map(|v| toml::Value::Float(*v)).collect())
    } else {
        match (table.get(*head), values) {
            (Some(toml::Value::Integer(_)), [v]) if v.fract() == 0.0 => toml::Value::Integer(*v as i64),
            (Some(toml::Value::Float(_)) | Some(toml::Value::Integer(_)) | None, [v]) => toml::Value::Float(*v),
            (Some(other), [_]) => return Err(format!("`{head}` is not numeric: {other}")),
            _ => return Err(format!("`{head}` takes one value, got {}", values.len())),
        }
    };
    table.insert(head.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_scenario;

    const EXAMPLE: &str = r#"
[ensemble]
optical_depth = 300
delta_mhz = 230

[signal]
width_us = 5

[control_store]
rabi_mhz = 4
center_us = -5
width_us = 9

[protocol]
storage_time_us = 5
"#;

    #[test]
    fn file_matches_builtin_scenario() {
        let f = FileConfig::parse(EXAMPLE).unwrap();
        assert_eq!(f, FileConfig::experiment_like());
        let a = validate_scenario(f.to_scenario().unwrap()).unwrap();
        let b = validate_scenario(ScenarioConfig::experiment_like()).unwrap();
        assert!((a.gamma - b.gamma).abs() < 1e-12);
        assert!((a.control_read.peak() - b.control_read.peak()).abs() < 1e-12);
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.read_grid, b.read_grid);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut f = FileConfig::experiment_like();
        f.dephasing = Some(DephasingConfig {
            eta0: 0.69,
            tau_d_us: 110.0,
            tau_t_us: 170.0,
        });
        assert_eq!(FileConfig::parse(&f.to_toml()).unwrap(), f);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = EXAMPLE.replace("delta_mhz", "detuning_mhz");
        let e = FileConfig::parse(&text).unwrap_err();
        assert!(
            e.to_string().contains("detuning_mhz") || e.to_string().contains("delta_mhz"),
            "{e}"
        );
    }

    #[test]
    fn dotted_paths() {
        let mut f = FileConfig::experiment_like();
        f.set_path("control_store.width_us", &[12.0]).unwrap();
        f.set_path("ensemble.optical_depth", &[100.0]).unwrap();
        f.set_path("control_read.rabi_mhz", &[6.0]).unwrap();
        f.set_path("control_store.bins", &[0.0, 1.0, 0.5]).unwrap();
        assert_eq!(f.control_store.width_us, 12.0);
        assert_eq!(f.ensemble.optical_depth, 100.0);
        assert_eq!(f.read_control().rabi_mhz, 6.0);
        assert_eq!(f.control_store.bins.as_deref(), Some(&[0.0, 1.0, 0.5][..]));
        assert!(f.set_path("control_store.nope", &[1.0]).is_err());
        assert!(f.set_path("nowhere.x", &[1.0]).is_err());
        assert!(f.set_path("protocol.direction", &[1.0]).is_err());
    }

    #[test]
    fn space_keys_must_resolve() {
        let mut f = FileConfig::experiment_like();
        f.optimize = Some(OptimizeConfig {
            objective: Objective::Leakage,
            budget: 10,
            read_factor: None,
            dims: vec![DimConfig {
                key: "control_store.rabi".into(),
                lower: 0.0,
                upper: 1.0,
                encoding: Encoding::Scalar,
            }],
        });
        assert!(f.param_space().is_err());
        f.optimize.as_mut().unwrap().dims[0].key = "control_store.rabi_mhz".into();
        assert_eq!(f.param_space().unwrap().dimension(), 1);
    }

    #[test]
    fn binned_control() {
        let mut f = FileConfig::experiment_like();
        f.control_store.bins = Some(vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0]);
        let s = validate_scenario(f.to_scenario().unwrap()).unwrap();
        assert!(matches!(s.control_store.envelope, Envelope::Samples(_)));
        assert!((s.control_store.peak() - mhz(4.0)).abs() < 1e-12);
    }
}
