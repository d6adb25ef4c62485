//! Readout trains on a stored spin wave.

use proptest::prelude::*;
use raman_memory::dynamics::simulate_storage;
use raman_memory::model::units::mhz;
use raman_memory::model::{validate_scenario, PulseShape, Scenario, ScenarioConfig};
use raman_memory::readout::{estimate_extraction_ratio, run_readout_train, tune_first_extraction, ReadoutTrain};

fn experiment() -> Scenario {
    validate_scenario(ScenarioConfig::experiment_like()).unwrap()
}

#[test]
fn weak_extraction_is_geometric() {
    let s = experiment();
    let sw = simulate_storage(&s).unwrap().spinwave_after_storage;
    let train = ReadoutTrain::uniform(PulseShape::gaussian_fwhm(mhz(0.5), -5.0, 9.0));
    let (tuned, first) = tune_first_extraction(&s, &train, &sw, 0.1).unwrap();
    assert!((first - 0.1).abs() < 1e-3);
    let r = run_readout_train(&s, &tuned, &sw).unwrap();
    let est = estimate_extraction_ratio(&r.energies).unwrap();
    assert!(est.max_relative_residual < 0.01, "{est:?}");
    assert!((est.ratio - 0.1).abs() < 0.01, "{est:?}");
}

#[test]
fn strong_extraction_departs_from_geometric() {
    // Successive readouts act like one readout of the summed pulse area, and
    // the cumulative retrieval is not exponential in that area, so the
    // per-readout ratio drifts once the first readout takes a large share.
    let s = experiment();
    let sw = simulate_storage(&s).unwrap().spinwave_after_storage;
    let train = ReadoutTrain::uniform(PulseShape::gaussian_fwhm(mhz(1.5), -5.0, 9.0));
    let (tuned, _) = tune_first_extraction(&s, &train, &sw, 0.6).unwrap();
    let r = run_readout_train(&s, &tuned, &sw).unwrap();
    let est = estimate_extraction_ratio(&r.energies).unwrap();
    assert!(est.max_relative_residual > 0.02, "{est:?}");
    assert!(est.ratio > 0.6, "{est:?}");
}

#[test]
fn mode_mismatch_scales_every_readout() {
    let s = experiment();
    let sw = simulate_storage(&s).unwrap().spinwave_after_storage;
    let mut train = ReadoutTrain::uniform(PulseShape::gaussian_fwhm(mhz(1.0), -5.0, 9.0));
    let full = run_readout_train(&s, &train, &sw).unwrap();
    train.mode_match = 0.65;
    let part = run_readout_train(&s, &train, &sw).unwrap();
    for (a, b) in full.energies.iter().zip(&part.energies) {
        assert!((b / a - 0.65).abs() < 1e-9);
    }
    assert_eq!(full.fractions().len(), 4);
    for (a, b) in full.fractions().iter().zip(part.fractions()) {
        assert!((a - b).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]
    #[test]
    fn weak_trains_decrease_and_conserve(rabi in 0.3f64..1.5, n in 2usize..6, mode_match in 0.3f64..1.0) {
        let s = experiment();
        let sw = simulate_storage(&s).unwrap().spinwave_after_storage;
        let mut train = ReadoutTrain::uniform(PulseShape::gaussian_fwhm(mhz(rabi), -5.0, 9.0));
        train.n_pulses = n;
        train.overrides = vec![None; n];
        train.mode_match = mode_match;
        let r = run_readout_train(&s, &train, &sw).unwrap();
        prop_assert!(r.energies.windows(2).all(|w| w[1] < w[0]), "{:?}", r.energies);
        let accounted = r.total_energy() + r.residual + r.losses.iter().sum::<f64>();
        prop_assert!((accounted - (r.stored - r.unmatched)).abs() <= 1e-3);
    }
}
