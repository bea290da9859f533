//! Hidden Markov model training and benchmarking.
//!
//! The crate provides the model types and exact inference (forward, backward,
//! Viterbi, sampling), Baum-Welch re-estimation, the two sequence-scoring
//! objectives (log-odds against a null model and sum-of-pairs over
//! Viterbi-derived alignments), three metaheuristic trainers behind a shared
//! objective contract (ARO, MARO, and simulated annealing over a signed
//! fixed-point bit encoding), FASTA ingestion, and an experiment harness that
//! runs repeated seeded trainings and reports mean +/- standard error tables.

// lattice recursions index several arrays per step; plain index loops stay
#![allow(clippy::needless_range_loop)]

pub mod codec;
pub mod em;
pub mod fitness;
pub mod harness;
pub mod inference;
pub mod model;
pub mod model_io;
pub mod objective;
pub mod optimize;
pub mod sample;
pub mod seqio;

pub use codec::{Chromosome, Codec};
pub use em::{bw_step, mixture_responsibility, train_bw, ReestimateOutput, TrainConfig};
pub use fitness::{model_from_vector, parameter_codec, HmmObjective, ModelShape, ScoreKind};
pub use harness::{
    emit_report, run_experiment, Aggregate, Algorithm, ComparisonTable, ExperimentConfig,
    OutputFormat, RunReport, Split,
};
pub use inference::{
    backward, forward, forward_backward, log_likelihood, viterbi, ForwardBackwardResult,
};
pub use model::{
    EmissionModel, HmmModel, MixtureComponent, ObsItem, ObservationSequence, StatePath,
    ValidationReport,
};
pub use objective::{align, log_odds, null_model, sop_raw, sop_reference, Alignment, PairDistance};
pub use optimize::{
    aro_run, delta_t, maro_run, mutation_prob, reproduce, sa_run, Objective, SearchConfig,
    SearchOutcome, TraceRecord,
};
pub use sample::sample;
pub use seqio::{read_fasta, synthesize, SequenceDataset};
