//! Turning decoded parameter vectors into valid models and scoring them, so
//! the bit-string trainers can optimize HMMs directly.

use ndarray::Array2;

use crate::codec::Codec;
use crate::inference::forward;
use crate::model::{EmissionModel, HmmModel, MixtureComponent, ObservationSequence, VARIANCE_FLOOR};
use crate::objective::{align, null_model, sop_raw, ColumnMismatch, ScoreError};
use crate::optimize::{EvalError, Objective};
use crate::seqio::SequenceDataset;

/// Additive floor applied to every stochastic entry before renormalizing, so
/// any decoded vector induces a strictly positive, validate-passing model.
pub const STOCHASTIC_FLOOR: f64 = 1e-6;

/// Which fitness function a trainer maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// Mean base-2 log-likelihood ratio against the dataset null model.
    LogOdds,
    /// Negated raw sum-of-pairs distance of the Viterbi-derived alignment.
    SumOfPairs,
}

impl ScoreKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreKind::LogOdds => "log_odds",
            ScoreKind::SumOfPairs => "sop",
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape of the model a parameter vector describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelShape {
    Discrete { n_states: usize, n_symbols: usize },
    Mixture { n_states: usize, n_components: usize, dim: usize },
}

impl ModelShape {
    pub fn n_states(&self) -> usize {
        match self {
            ModelShape::Discrete { n_states, .. } | ModelShape::Mixture { n_states, .. } => {
                *n_states
            }
        }
    }

    /// Length of the parameter vector in the documented layout.
    pub fn n_vars(&self) -> usize {
        match *self {
            ModelShape::Discrete { n_states, n_symbols } => {
                n_states + n_states * n_states + n_states * n_symbols
            }
            ModelShape::Mixture { n_states, n_components, dim } => {
                n_states + n_states * n_states + n_states * n_components * (1 + 2 * dim)
            }
        }
    }
}

fn stochastic_row(raw: &[f64]) -> Vec<f64> {
    let mut row: Vec<f64> = raw.iter().map(|&v| v.max(0.0) + STOCHASTIC_FLOOR).collect();
    let sum: f64 = row.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        for v in &mut row {
            *v /= sum;
        }
    } else {
        let u = 1.0 / row.len() as f64;
        row.fill(u);
    }
    row
}

/// Map a raw parameter vector onto a valid model.
///
/// Layout: the initial distribution, then the transition rows, then the
/// emission block — for discrete shapes the emission rows; for mixtures,
/// per state: the component weights, then each component's mean, then each
/// component's variances. Stochastic rows are clamped at zero, floored, and
/// renormalized; variances are floored at [`VARIANCE_FLOOR`]; means pass
/// through unchanged.
pub fn model_from_vector(shape: &ModelShape, x: &[f64]) -> HmmModel {
    assert_eq!(x.len(), shape.n_vars(), "vector length must match the shape");
    let n = shape.n_states();
    let initial = stochastic_row(&x[0..n]);
    let mut transition = Array2::zeros((n, n));
    for i in 0..n {
        let row = stochastic_row(&x[n + i * n..n + (i + 1) * n]);
        for j in 0..n {
            transition[[i, j]] = row[j];
        }
    }
    let base = n + n * n;
    let emission = match *shape {
        ModelShape::Discrete { n_symbols, .. } => {
            let mut table = Array2::zeros((n, n_symbols));
            for j in 0..n {
                let row = stochastic_row(&x[base + j * n_symbols..base + (j + 1) * n_symbols]);
                for v in 0..n_symbols {
                    table[[j, v]] = row[v];
                }
            }
            EmissionModel::Discrete { table }
        }
        ModelShape::Mixture { n_components: m, dim: d, .. } => {
            let per_state = m * (1 + 2 * d);
            let states = (0..n)
                .map(|j| {
                    let s = base + j * per_state;
                    let weights = stochastic_row(&x[s..s + m]);
                    (0..m)
                        .map(|k| {
                            let mean_start = s + m + k * d;
                            let var_start = s + m + m * d + k * d;
                            MixtureComponent {
                                weight: weights[k],
                                mean: x[mean_start..mean_start + d].to_vec(),
                                variance: x[var_start..var_start + d]
                                    .iter()
                                    .map(|&v| v.max(VARIANCE_FLOOR))
                                    .collect(),
                            }
                        })
                        .collect()
                })
                .collect();
            EmissionModel::GaussianMixture { states }
        }
    };
    HmmModel {
        initial,
        transition,
        emission,
    }
}

/// Codec covering a shape's parameter vector: stochastic variables are
/// bounded in `[0, 1]`; mixture means and variances get a symmetric box
/// derived from the integer width.
pub fn parameter_codec(shape: &ModelShape, int_bits: usize, frac_bits: usize) -> Codec {
    let n = shape.n_states();
    let stochastic = n + n * n;
    let (mut lower, mut upper) = (vec![0.0; stochastic], vec![1.0; stochastic]);
    match *shape {
        ModelShape::Discrete { n_symbols, .. } => {
            lower.extend(vec![0.0; n * n_symbols]);
            upper.extend(vec![1.0; n * n_symbols]);
        }
        ModelShape::Mixture { n_components: m, dim: d, .. } => {
            let span = ((1u64 << int_bits) - 1) as f64;
            for _ in 0..n {
                lower.extend(vec![0.0; m]);
                upper.extend(vec![1.0; m]);
                lower.extend(vec![-span; m * d]);
                upper.extend(vec![span; m * d]);
                lower.extend(vec![VARIANCE_FLOOR; m * d]);
                upper.extend(vec![span.max(1.0); m * d]);
            }
        }
    }
    Codec::new(int_bits, frac_bits, lower, upper).expect("parameter codec layout is valid")
}

/// Maximization objective over HMM parameter vectors: decode, smooth into a
/// valid model, score against the held data.
///
/// Only discrete shapes are supported: both scores are defined over symbol
/// datasets (the null model is a unigram over the alphabet and alignments
/// come from Viterbi-decoded symbol sequences).
pub struct HmmObjective {
    shape: ModelShape,
    kind: ScoreKind,
    data: Vec<ObservationSequence>,
    alphabet: Vec<char>,
    null: HmmModel,
    /// Cached per-sequence log-likelihoods under the null model.
    null_lls: Vec<f64>,
    calls: u64,
}

impl HmmObjective {
    pub fn new(
        shape: ModelShape,
        kind: ScoreKind,
        dataset: &SequenceDataset,
    ) -> Result<Self, ScoreError> {
        let n_symbols = match shape {
            ModelShape::Discrete { n_symbols, .. } => n_symbols,
            ModelShape::Mixture { .. } => return Err(ScoreError::RequiresSymbols),
        };
        if dataset.is_empty() {
            return Err(ScoreError::EmptyDataset);
        }
        if n_symbols != dataset.alphabet.len() {
            return Err(ScoreError::AlignmentMismatch(format!(
                "shape has {n_symbols} symbols but the dataset alphabet has {}",
                dataset.alphabet.len()
            )));
        }
        if kind == ScoreKind::SumOfPairs && dataset.len() < 2 {
            return Err(ScoreError::TooFewRows { rows: dataset.len() });
        }
        let null = null_model(&dataset.indexed, n_symbols)?;
        let mut null_lls = Vec::with_capacity(dataset.len());
        for (i, obs) in dataset.indexed.iter().enumerate() {
            let ll = forward(&null, obs)?.log_likelihood;
            if ll == f64::NEG_INFINITY {
                return Err(ScoreError::DegenerateNull { index: i });
            }
            null_lls.push(ll);
        }
        Ok(HmmObjective {
            shape,
            kind,
            data: dataset.indexed.clone(),
            alphabet: dataset.alphabet.clone(),
            null,
            null_lls,
            calls: 0,
        })
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn null(&self) -> &HmmModel {
        &self.null
    }

    /// Score an explicit model with this objective's fitness function.
    pub fn score_model(&self, model: &HmmModel) -> Result<f64, ScoreError> {
        match self.kind {
            ScoreKind::LogOdds => {
                let mut total = 0.0;
                for (obs, &null_ll) in self.data.iter().zip(&self.null_lls) {
                    let ll = forward(model, obs)?.log_likelihood;
                    total += (ll - null_ll) / std::f64::consts::LN_2;
                }
                Ok(total / self.data.len() as f64)
            }
            ScoreKind::SumOfPairs => {
                let alignment = align(model, &self.data, &self.alphabet)?;
                Ok(-sop_raw(&alignment, &ColumnMismatch)?)
            }
        }
    }
}

impl Objective for HmmObjective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64, EvalError> {
        self.calls += 1;
        let model = model_from_vector(&self.shape, x);
        self.score_model(&model)
            .map_err(|e| EvalError { message: e.to_string() })
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::log_odds;
    use crate::seqio::{read_fasta, SequenceRecord};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset() -> SequenceDataset {
        read_fasta(">a\nAABB\n>b\nABAB\n>c\nBBBA\n".as_bytes(), None).unwrap()
    }

    #[test]
    fn uniform_vector_scores_near_zero_log_odds_on_uniform_data() {
        // all-equal raw parameters induce the uniform model, which is close
        // to the unigram null on balanced data
        let mut records = Vec::new();
        for i in 0..6 {
            records.push(SequenceRecord {
                name: format!("u{i}"),
                raw: if i % 2 == 0 { "ABABAB".into() } else { "BABABA".into() },
            });
        }
        let ds = SequenceDataset::from_records(records, None).unwrap();
        let shape = ModelShape::Discrete { n_states: 2, n_symbols: 2 };
        let mut objective = HmmObjective::new(shape, ScoreKind::LogOdds, &ds).unwrap();
        let x = vec![0.5; shape.n_vars()];
        let fitness = objective.evaluate(&x).unwrap();
        assert!(fitness.abs() < 0.05, "fitness {fitness} should be near zero");
    }

    #[test]
    fn exact_vector_matches_direct_scoring() {
        let ds = toy_dataset();
        let shape = ModelShape::Discrete { n_states: 2, n_symbols: 2 };
        let mut objective = HmmObjective::new(shape, ScoreKind::LogOdds, &ds).unwrap();
        let x: Vec<f64> = vec![0.6, 0.4, 0.7, 0.3, 0.4, 0.6, 0.9, 0.1, 0.2, 0.8];
        let fitness = objective.evaluate(&x).unwrap();
        let model = model_from_vector(&shape, &x);
        let direct = log_odds(&model, objective.null(), &ds.indexed).unwrap();
        assert!((fitness - direct).abs() < 1e-12);
    }

    #[test]
    fn random_vectors_always_induce_valid_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let shapes = [
            ModelShape::Discrete { n_states: 3, n_symbols: 4 },
            ModelShape::Mixture { n_states: 2, n_components: 2, dim: 2 },
        ];
        for shape in shapes {
            for _ in 0..5000 {
                let x: Vec<f64> = (0..shape.n_vars())
                    .map(|_| rand::Rng::random::<f64>(&mut rng) * 20.0 - 10.0)
                    .collect();
                let model = model_from_vector(&shape, &x);
                let verdict = model.validate();
                assert!(verdict.is_ok(), "shape {shape:?}: {verdict}");
            }
        }
    }

    #[test]
    fn sop_objective_negates_the_distance() {
        let ds = toy_dataset();
        let shape = ModelShape::Discrete { n_states: 2, n_symbols: 2 };
        let mut objective = HmmObjective::new(shape, ScoreKind::SumOfPairs, &ds).unwrap();
        let x: Vec<f64> = vec![0.6, 0.4, 0.7, 0.3, 0.4, 0.6, 0.9, 0.1, 0.2, 0.8];
        let fitness = objective.evaluate(&x).unwrap();
        let model = model_from_vector(&shape, &x);
        let alignment = align(&model, &ds.indexed, &ds.alphabet).unwrap();
        let raw = sop_raw(&alignment, &ColumnMismatch).unwrap();
        assert_eq!(fitness, -raw);
        assert!(fitness <= 0.0);
    }

    #[test]
    fn evaluation_counter_tracks_calls() {
        let ds = toy_dataset();
        let shape = ModelShape::Discrete { n_states: 2, n_symbols: 2 };
        let mut objective = HmmObjective::new(shape, ScoreKind::LogOdds, &ds).unwrap();
        assert_eq!(objective.calls(), 0);
        let x = vec![0.5; shape.n_vars()];
        objective.evaluate(&x).unwrap();
        objective.evaluate(&x).unwrap();
        assert_eq!(objective.calls(), 2);
    }

    #[test]
    fn mixture_shapes_are_rejected() {
        let ds = toy_dataset();
        let shape = ModelShape::Mixture { n_states: 2, n_components: 2, dim: 1 };
        assert!(matches!(
            HmmObjective::new(shape, ScoreKind::LogOdds, &ds),
            Err(ScoreError::RequiresSymbols)
        ));
    }

    #[test]
    fn sop_needs_at_least_two_sequences() {
        let ds = read_fasta(">a\nAABB\n".as_bytes(), None).unwrap();
        let shape = ModelShape::Discrete { n_states: 2, n_symbols: 2 };
        assert!(matches!(
            HmmObjective::new(shape, ScoreKind::SumOfPairs, &ds),
            Err(ScoreError::TooFewRows { rows: 1 })
        ));
    }

    #[test]
    fn parameter_codec_covers_the_layout() {
        let shape = ModelShape::Discrete { n_states: 4, n_symbols: 20 };
        let codec = parameter_codec(&shape, 1, 8);
        assert_eq!(codec.n_vars(), shape.n_vars());
        assert_eq!(codec.total_bits(), shape.n_vars() * 10);
        let mixture = ModelShape::Mixture { n_states: 2, n_components: 3, dim: 2 };
        let codec = parameter_codec(&mixture, 3, 6);
        assert_eq!(codec.n_vars(), mixture.n_vars());
    }
}
