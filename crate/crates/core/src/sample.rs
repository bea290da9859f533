//! Generative sampling from a model.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{EmissionModel, HmmModel, ObservationSequence, StatePath};

/// Draw an index from a categorical distribution given by `weights`.
///
/// Weights are assumed non-negative; they do not need to sum exactly to one.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Sample a state path of the given length and its emitted observations.
///
/// States are drawn from the initial distribution and then row by row from
/// the transition matrix; each observation is drawn from the current state's
/// emission. The same seed always reproduces the same output.
pub fn sample<R: Rng + ?Sized>(
    model: &HmmModel,
    length: usize,
    rng: &mut R,
) -> (StatePath, ObservationSequence) {
    assert!(length >= 1, "sample length must be at least 1");
    let mut states = Vec::with_capacity(length);
    let mut state = sample_categorical(&model.initial, rng);
    states.push(state);
    for _ in 1..length {
        let row: Vec<f64> = model.transition.row(state).to_vec();
        state = sample_categorical(&row, rng);
        states.push(state);
    }
    let obs = match &model.emission {
        EmissionModel::Discrete { table } => {
            let mut symbols = Vec::with_capacity(length);
            for &s in &states {
                let row: Vec<f64> = table.row(s).to_vec();
                symbols.push(sample_categorical(&row, rng));
            }
            ObservationSequence::Symbols(symbols)
        }
        EmissionModel::GaussianMixture { states: comps } => {
            let mut vectors = Vec::with_capacity(length);
            for &s in &states {
                let weights: Vec<f64> = comps[s].iter().map(|c| c.weight).collect();
                let k = sample_categorical(&weights, rng);
                let comp = &comps[s][k];
                let x: Vec<f64> = comp
                    .mean
                    .iter()
                    .zip(&comp.variance)
                    .map(|(&m, &v)| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + v.sqrt() * z
                    })
                    .collect();
                vectors.push(x);
            }
            ObservationSequence::Vectors(vectors)
        }
    };
    (StatePath { states }, obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deterministic_chain() -> HmmModel {
        HmmModel {
            initial: vec![1.0, 0.0],
            transition: arr2(&[[0.0, 1.0], [1.0, 0.0]]),
            emission: EmissionModel::Discrete {
                table: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            },
        }
    }

    #[test]
    fn degenerate_chain_is_forced() {
        let model = deterministic_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (path, obs) = sample(&model, 4, &mut rng);
        assert_eq!(path.states, vec![0, 1, 0, 1]);
        assert_eq!(obs, ObservationSequence::Symbols(vec![0, 1, 0, 1]));
    }

    #[test]
    fn identical_seeds_give_identical_draws() {
        let model = HmmModel {
            initial: vec![0.3, 0.7],
            transition: arr2(&[[0.5, 0.5], [0.2, 0.8]]),
            emission: EmissionModel::Discrete {
                table: arr2(&[[0.6, 0.4], [0.1, 0.9]]),
            },
        };
        let a = sample(&model, 50, &mut ChaCha8Rng::seed_from_u64(99));
        let b = sample(&model, 50, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn initial_state_frequency_matches_pi() {
        let model = HmmModel {
            initial: vec![0.3, 0.7],
            transition: arr2(&[[0.5, 0.5], [0.2, 0.8]]),
            emission: EmissionModel::Discrete {
                table: arr2(&[[0.6, 0.4], [0.1, 0.9]]),
            },
        };
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut zero = 0usize;
        for _ in 0..n {
            let (path, _) = sample(&model, 1, &mut rng);
            if path.states[0] == 0 {
                zero += 1;
            }
        }
        let p = 0.3f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let freq = zero as f64 / n as f64;
        assert!(
            (freq - p).abs() < 3.0 * sigma,
            "frequency {freq} outside 3 sigma of {p}"
        );
    }

    #[test]
    fn mixture_sampling_has_matching_dimension() {
        use crate::model::MixtureComponent;
        let model = HmmModel {
            initial: vec![1.0],
            transition: arr2(&[[1.0]]),
            emission: EmissionModel::GaussianMixture {
                states: vec![vec![MixtureComponent {
                    weight: 1.0,
                    mean: vec![1.0, -1.0],
                    variance: vec![0.5, 2.0],
                }]],
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, obs) = sample(&model, 10, &mut rng);
        match obs {
            ObservationSequence::Vectors(v) => {
                assert_eq!(v.len(), 10);
                assert!(v.iter().all(|x| x.len() == 2));
            }
            _ => panic!("expected vector observations"),
        }
    }
}
