//! Shipped scenario files and validated-window invariants.

use std::path::Path;

use proptest::prelude::*;
use raman_memory::config::FileConfig;
use raman_memory::model::{validate_scenario, PulseShape, ScenarioConfig};

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let cfg = FileConfig::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        validate_scenario(cfg.to_scenario().unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if cfg.optimize.is_some() {
            cfg.param_space().unwrap();
        }
        if let Some(t) = &cfg.train {
            t.to_train().unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 4);
}

fn covers(g: &raman_memory::model::GridSpec, p: &PulseShape) -> bool {
    let (a, b) = p.support();
    a >= g.t_start - 1e-9 && b <= g.t_end + 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn validated_windows_cover_every_pulse(
        signal_fwhm in 0.2f64..10.0,
        control_fwhm in 0.2f64..20.0,
        lead in -10.0f64..10.0,
        rabi in 0.5f64..20.0,
    ) {
        let mut c = ScenarioConfig::experiment_like();
        c.signal = PulseShape::gaussian_fwhm(1.0, 0.0, signal_fwhm);
        c.control_store = PulseShape::gaussian_fwhm(rabi, lead, control_fwhm);
        c.control_read = c.control_store.with_amplitude(2.0 * rabi);
        c.fit_grids();
        let s = validate_scenario(c).unwrap();
        prop_assert!(covers(&s.grid, &s.signal) && covers(&s.grid, &s.control_store));
        prop_assert!(covers(&s.read_grid, &s.control_read));
        let (a, b) = s.signal.support();
        let sigma = signal_fwhm / raman_memory::model::pulse::FWHM_PER_SIGMA;
        prop_assert!((b - a) >= 8.0 * sigma - 1e-9);
    }
}
