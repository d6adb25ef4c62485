use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use crate::gp::{halton, GpModel};

/// Quasi-random candidates scored per proposal.
pub const N_CANDIDATES: usize = 4096;
/// Gaussian perturbations of the incumbent added to the candidate set.
pub const N_NEIGHBORS: usize = 256;
/// Standard deviation of those perturbations, in unit-box coordinates.
pub const NEIGHBORHOOD_SCALE: f64 = 0.05;

/// Expected improvement below `best` for a Gaussian prediction.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sd = variance.max(0.0).sqrt();
    let gain = best - mean;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let n = StdNormal::new(0.0, 1.0).expect("unit normal");
    gain * n.cdf(z) + sd * n.pdf(z)
}

/// The candidate maximizing expected improvement; ties go to the larger
/// posterior variance, then to the earlier candidate.
pub fn propose_next(model: &GpModel, seed: u64) -> Vec<f64> {
    let dim = model.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();

    let (incumbent, best) = model.inputs().iter().map(|x| (x, model.predict(x).0)).fold(
        (&model.inputs()[0], f64::INFINITY),
        |acc, (x, m)| if m < acc.1 { (x, m) } else { acc },
    );

    let mut candidates: Vec<Vec<f64>> = (1..=N_CANDIDATES)
        .map(|k| {
            halton(k, dim)
                .iter()
                .zip(&shift)
                .map(|(u, s)| (u + s).fract())
                .collect()
        })
        .collect();
    let jitter = Normal::new(0.0, NEIGHBORHOOD_SCALE).expect("positive scale");
    for _ in 0..N_NEIGHBORS {
        candidates.push(
            incumbent
                .iter()
                .map(|u| (u + jitter.sample(&mut rng)).clamp(0.0, 1.0))
                .collect(),
        );
    }

    let mut choice = 0;
    let mut score = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let (m, v) = model.predict(c);
        let s = (expected_improvement(m, v, best), v);
        if s.0 > score.0 || (s.0 == score.0 && s.1 > score.1) {
            score = s;
            choice = i;
        }
    }
    candidates.swap_remove(choice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Hyperparameters;

    #[test]
    fn improvement_limits() {
        assert_eq!(expected_improvement(1.0, 0.0, 2.0), 1.0);
        assert_eq!(expected_improvement(3.0, 0.0, 2.0), 0.0);
        let ei = expected_improvement(0.0, 1.0, 0.0);
        assert!((ei - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!(expected_improvement(0.0, 4.0, 0.0) > ei);
    }

    #[test]
    fn proposal_lands_in_the_basin() {
        let xs: Vec<Vec<f64>> = [0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0].iter().map(|&x| vec![x]).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 1.0 - (-((x[0] - 0.45) / 0.08f64).powi(2)).exp())
            .collect();
        let m = GpModel::fit(&xs, &ys).unwrap();
        let p = propose_next(&m, 7);
        let best = xs.iter().map(|x| m.predict(x).0).fold(f64::INFINITY, f64::min);
        assert!(m.predict(&p).0 < best, "proposal {p:?}");
        assert!((p[0] - 0.45).abs() < 0.1);
    }

    #[test]
    fn flat_data_explores_by_variance() {
        let xs = vec![vec![0.1, 0.1], vec![0.9, 0.9], vec![0.1, 0.9]];
        let h = Hyperparameters {
            length_scales: vec![0.3, 0.3],
            signal_variance: 1.0,
            noise_variance: 1e-8,
        };
        let m = GpModel::with_hyperparameters(&xs, &[2.0, 2.0, 2.0], h).unwrap();
        let p = propose_next(&m, 1);
        let vp = m.predict(&p).1;
        let grid_max = (0..=50)
            .flat_map(|i| (0..=50).map(move |j| vec![i as f64 / 50.0, j as f64 / 50.0]))
            .map(|c| m.predict(&c).1)
            .fold(0.0, f64::max);
        assert!(vp >= grid_max - 1e-3, "{vp} vs {grid_max}");
    }

    #[test]
    fn degenerate_one_dimensional_case() {
        let m = GpModel::fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0]).unwrap();
        let p = propose_next(&m, 3);
        assert_eq!(p.len(), 1);
        assert!((0.0..=1.0).contains(&p[0]));
        assert_eq!(p, propose_next(&m, 3));
    }
}
