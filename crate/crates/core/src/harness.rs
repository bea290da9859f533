//! Experiment harness: repeated seeded training runs per algorithm, mean and
//! standard-error aggregation, and comparison-table emission.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::em::{train_bw, TrainConfig};
use crate::fitness::{model_from_vector, parameter_codec, HmmObjective, ModelShape, ScoreKind};
use crate::model::HmmModel;
use crate::objective::{align, log_odds, sop_raw, ColumnMismatch, ScoreError};
use crate::optimize::{aro_run, maro_run, sa_run, Objective, SearchConfig};
use crate::seqio::SequenceDataset;

/// Training algorithms the harness compares, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Bw,
    Sa,
    Aro,
    Maro,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Bw, Algorithm::Sa, Algorithm::Aro, Algorithm::Maro];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bw => "BW",
            Algorithm::Sa => "SA",
            Algorithm::Aro => "ARO",
            Algorithm::Maro => "MARO",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s.to_ascii_lowercase().as_str() {
            "bw" => Some(Algorithm::Bw),
            "sa" => Some(Algorithm::Sa),
            "aro" => Some(Algorithm::Aro),
            "maro" => Some(Algorithm::Maro),
            _ => None,
        }
    }

    /// Deterministic given a fixed initial model, so repetitions collapse.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Algorithm::Bw)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<OutputFormat> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(OutputFormat::Csv),
            "markdown" | "md" => Some(OutputFormat::Markdown),
            _ => None,
        }
    }
}

/// Which half of the split a table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn parse(s: &str) -> Option<Split> {
        match s.to_ascii_lowercase().as_str() {
            "train" | "training" => Some(Split::Train),
            "validation" | "valid" => Some(Split::Validation),
            _ => None,
        }
    }
}

/// Full description of one experiment (one dataset, one algorithm).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Row label in comparison tables.
    pub dataset_name: String,
    pub algorithm: Algorithm,
    pub objective: ScoreKind,
    pub n_states: usize,
    pub iterations: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    pub train_size: usize,
    /// Codec layout for the metaheuristic trainers.
    pub int_bits: usize,
    pub frac_bits: usize,
    /// Fan repetitions out across threads; aggregation order stays fixed.
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(dataset_name: &str, algorithm: Algorithm, objective: ScoreKind) -> Self {
        ExperimentConfig {
            dataset_name: dataset_name.to_string(),
            algorithm,
            objective,
            n_states: 4,
            iterations: 2000,
            repetitions: 25,
            base_seed: 0,
            train_size: 0,
            int_bits: 1,
            frac_bits: 8,
            parallel: false,
        }
    }
}

/// One seeded training repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionRecord {
    pub seed: u64,
    pub train_score: f64,
    pub validation_score: Option<f64>,
    pub wall_secs: f64,
}

/// Mean, standard error (sample standard deviation over sqrt n), and range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
}

/// Aggregate a non-empty value list; a single value has standard error zero.
pub fn aggregate(values: &[f64]) -> Aggregate {
    assert!(!values.is_empty(), "cannot aggregate zero values");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Aggregate {
        mean,
        std_error,
        min,
        max,
    }
}

/// Report of one experiment: per-repetition records plus aggregates on the
/// training and (when present) validation splits.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dataset_name: String,
    pub algorithm: Algorithm,
    pub objective: ScoreKind,
    /// How stochastic trainers draw their starting models.
    pub init_note: &'static str,
    pub train_size: usize,
    pub iterations: usize,
    pub base_seed: u64,
    pub reps: Vec<RepetitionRecord>,
    pub train: Aggregate,
    pub validation: Option<Aggregate>,
}

#[derive(Debug)]
pub enum ExperimentError {
    BadConfig(String),
    Split(crate::seqio::FastaError),
    Repetition { seed: u64, message: String },
    MixedObjectives,
    MissingValidation { dataset: String },
    EmptySummary,
    DuplicateCell { family: String, algorithm: Algorithm },
}

impl std::fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentError::BadConfig(m) => write!(f, "bad experiment config: {m}"),
            ExperimentError::Split(e) => write!(f, "split failed: {e}"),
            ExperimentError::Repetition { seed, message } => {
                write!(f, "repetition with seed {seed} failed: {message}")
            }
            ExperimentError::MixedObjectives => {
                write!(f, "cannot summarize reports with different objectives")
            }
            ExperimentError::MissingValidation { dataset } => {
                write!(f, "report for '{dataset}' has no validation split")
            }
            ExperimentError::EmptySummary => write!(f, "no reports to summarize"),
            ExperimentError::DuplicateCell { family, algorithm } => {
                write!(f, "duplicate report for '{family}' / {algorithm}")
            }
        }
    }
}

impl std::error::Error for ExperimentError {}

const INIT_NOTE: &str = "init=uniform-random-rows-renormalized";

/// Score a model under the configured objective. The log-odds null model is
/// always the one built from the training split, so training and validation
/// scores share a baseline.
fn score_model(
    model: &HmmModel,
    kind: ScoreKind,
    null: &HmmModel,
    data: &SequenceDataset,
) -> Result<f64, ScoreError> {
    match kind {
        ScoreKind::LogOdds => log_odds(model, null, &data.indexed),
        ScoreKind::SumOfPairs => {
            let alignment = align(model, &data.indexed, &data.alphabet)?;
            Ok(-sop_raw(&alignment, &ColumnMismatch)?)
        }
    }
}

fn run_repetition(
    config: &ExperimentConfig,
    seed: u64,
    train: &SequenceDataset,
    validation: Option<&SequenceDataset>,
    shape: ModelShape,
) -> Result<RepetitionRecord, ExperimentError> {
    let fail = |message: String| ExperimentError::Repetition { seed, message };
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let null = crate::objective::null_model(&train.indexed, train.alphabet.len())
        .map_err(|e| fail(e.to_string()))?;

    let (train_score, model) = match config.algorithm {
        Algorithm::Bw => {
            let init = HmmModel::random_discrete(config.n_states, train.alphabet.len(), &mut rng);
            let train_config = TrainConfig {
                max_iterations: config.iterations,
                loglik_tolerance: 1e-6,
                min_row_mass: 1e-6,
            };
            let (model, _) = train_bw(&init, &train.indexed, &train_config)
                .map_err(|e| fail(e.to_string()))?;
            let score = score_model(&model, config.objective, &null, train)
                .map_err(|e| fail(e.to_string()))?;
            (score, model)
        }
        Algorithm::Sa | Algorithm::Aro | Algorithm::Maro => {
            let mut objective = HmmObjective::new(shape, config.objective, train)
                .map_err(|e| fail(e.to_string()))?;
            let codec = parameter_codec(&shape, config.int_bits, config.frac_bits);
            let search = SearchConfig {
                iterations: config.iterations,
                ..SearchConfig::default()
            };
            let run = match config.algorithm {
                Algorithm::Sa => sa_run,
                Algorithm::Aro => aro_run,
                Algorithm::Maro => maro_run,
                Algorithm::Bw => unreachable!(),
            };
            let outcome = run(&mut objective, &codec, &search, &mut rng)
                .map_err(|e| fail(e.to_string()))?;
            let expected_calls = config.iterations as u64 + 1;
            if objective.calls() != expected_calls {
                return Err(fail(format!(
                    "objective was called {} times, expected {expected_calls}",
                    objective.calls()
                )));
            }
            (outcome.best_fitness, model_from_vector(&shape, &outcome.best))
        }
    };

    let validation_score = match validation {
        Some(v) => Some(
            score_model(&model, config.objective, &null, v).map_err(|e| fail(e.to_string()))?,
        ),
        None => None,
    };
    Ok(RepetitionRecord {
        seed,
        train_score,
        validation_score,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Run one experiment: split the dataset once with the base seed, then train
/// once per repetition with seed `base + r` (`r` starting at 1). The
/// deterministic Baum-Welch algorithm collapses to a single repetition.
pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &SequenceDataset,
) -> Result<RunReport, ExperimentError> {
    if config.repetitions < 1 {
        return Err(ExperimentError::BadConfig("repetitions must be at least 1".into()));
    }
    if config.iterations < 1 {
        return Err(ExperimentError::BadConfig("iterations must be at least 1".into()));
    }
    if config.n_states < 1 {
        return Err(ExperimentError::BadConfig("n_states must be at least 1".into()));
    }
    let train_size = if config.train_size == 0 {
        dataset.len()
    } else {
        config.train_size
    };
    let mut split_rng = ChaCha8Rng::seed_from_u64(config.base_seed);
    let (train, validation) = if train_size == dataset.len() {
        (dataset.clone(), None)
    } else {
        let (t, v) = dataset
            .split(train_size, &mut split_rng)
            .map_err(ExperimentError::Split)?;
        (t, Some(v))
    };

    let shape = ModelShape::Discrete {
        n_states: config.n_states,
        n_symbols: dataset.alphabet.len(),
    };
    let repetitions = if config.algorithm.is_deterministic() {
        1
    } else {
        config.repetitions
    };
    let seeds: Vec<u64> = (1..=repetitions as u64).map(|r| config.base_seed + r).collect();

    let run_one = |&seed: &u64| run_repetition(config, seed, &train, validation.as_ref(), shape);
    let results: Vec<Result<RepetitionRecord, ExperimentError>> = if config.parallel {
        seeds.par_iter().map(run_one).collect()
    } else {
        seeds.iter().map(run_one).collect()
    };
    let mut reps = Vec::with_capacity(results.len());
    for r in results {
        reps.push(r?);
    }

    let train_agg = aggregate(&reps.iter().map(|r| r.train_score).collect::<Vec<_>>());
    let validation_agg = if validation.is_some() {
        Some(aggregate(
            &reps
                .iter()
                .map(|r| r.validation_score.expect("validation split present"))
                .collect::<Vec<_>>(),
        ))
    } else {
        None
    };
    Ok(RunReport {
        dataset_name: config.dataset_name.clone(),
        algorithm: config.algorithm,
        objective: config.objective,
        init_note: INIT_NOTE,
        train_size,
        iterations: config.iterations,
        base_seed: config.base_seed,
        reps,
        train: train_agg,
        validation: validation_agg,
    })
}

/// One comparison table: families as rows, algorithms as columns, cells
/// formatted as `mean±SE` with two decimals (bare mean for the deterministic
/// Baum-Welch column).
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub objective: ScoreKind,
    pub split: Split,
    pub algorithms: Vec<Algorithm>,
    pub families: Vec<String>,
    /// Row-major cells parallel to `families` x `algorithms`; empty string
    /// where no report exists.
    pub cells: Vec<Vec<String>>,
}

/// Format one table cell from an aggregate.
pub fn format_cell(algorithm: Algorithm, agg: &Aggregate) -> String {
    if algorithm.is_deterministic() {
        format!("{:.2}", agg.mean)
    } else {
        format!("{:.2}±{:.2}", agg.mean, agg.std_error)
    }
}

/// Arrange reports into a comparison table for the chosen split.
pub fn summarize(reports: &[RunReport], split: Split) -> Result<ComparisonTable, ExperimentError> {
    if reports.is_empty() {
        return Err(ExperimentError::EmptySummary);
    }
    let objective = reports[0].objective;
    if reports.iter().any(|r| r.objective != objective) {
        return Err(ExperimentError::MixedObjectives);
    }
    let algorithms: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| reports.iter().any(|r| r.algorithm == *a))
        .collect();
    let mut families: Vec<String> = Vec::new();
    for r in reports {
        if !families.contains(&r.dataset_name) {
            families.push(r.dataset_name.clone());
        }
    }
    let mut cells = vec![vec![String::new(); algorithms.len()]; families.len()];
    for r in reports {
        let row = families.iter().position(|f| *f == r.dataset_name).unwrap();
        let col = algorithms.iter().position(|a| *a == r.algorithm).unwrap();
        if !cells[row][col].is_empty() {
            return Err(ExperimentError::DuplicateCell {
                family: r.dataset_name.clone(),
                algorithm: r.algorithm,
            });
        }
        let agg = match split {
            Split::Train => r.train,
            Split::Validation => r.validation.ok_or(ExperimentError::MissingValidation {
                dataset: r.dataset_name.clone(),
            })?,
        };
        cells[row][col] = format_cell(r.algorithm, &agg);
    }
    Ok(ComparisonTable {
        objective,
        split,
        algorithms,
        families,
        cells,
    })
}

/// Render a table as CSV or a Markdown pipe table. Output is deterministic.
pub fn emit_report(table: &ComparisonTable, format: OutputFormat) -> String {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str("family");
            for a in &table.algorithms {
                out.push(',');
                out.push_str(a.name());
            }
            out.push('\n');
            for (family, row) in table.families.iter().zip(&table.cells) {
                out.push_str(family);
                for cell in row {
                    out.push(',');
                    out.push_str(cell);
                }
                out.push('\n');
            }
        }
        OutputFormat::Markdown => {
            out.push_str("| family |");
            for a in &table.algorithms {
                out.push_str(&format!(" {} |", a.name()));
            }
            out.push('\n');
            out.push_str("| --- |");
            for _ in &table.algorithms {
                out.push_str(" --- |");
            }
            out.push('\n');
            for (family, row) in table.families.iter().zip(&table.cells) {
                out.push_str(&format!("| {family} |"));
                for cell in row {
                    out.push_str(&format!(" {cell} |"));
                }
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::read_fasta;

    fn small_dataset() -> SequenceDataset {
        let mut fasta = String::new();
        for i in 0..8 {
            fasta.push_str(&format!(">s{i}\n"));
            fasta.push_str(if i % 2 == 0 { "AABBAABB\n" } else { "ABABABAB\n" });
        }
        read_fasta(fasta.as_bytes(), None).unwrap()
    }

    fn quick_config(algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            dataset_name: "toy".into(),
            algorithm,
            objective: ScoreKind::LogOdds,
            n_states: 2,
            iterations: 20,
            repetitions: 3,
            base_seed: 100,
            train_size: 6,
            int_bits: 1,
            frac_bits: 6,
            parallel: false,
        }
    }

    #[test]
    fn bw_collapses_to_one_repetition() {
        let ds = small_dataset();
        let mut config = quick_config(Algorithm::Bw);
        config.repetitions = 25;
        let report = run_experiment(&config, &ds).unwrap();
        assert_eq!(report.reps.len(), 1);
        assert_eq!(report.train.std_error, 0.0);
    }

    #[test]
    fn stochastic_algorithms_use_distinct_seeds() {
        let ds = small_dataset();
        let report = run_experiment(&quick_config(Algorithm::Aro), &ds).unwrap();
        assert_eq!(report.reps.len(), 3);
        let seeds: Vec<u64> = report.reps.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![101, 102, 103]);
    }

    #[test]
    fn reports_are_reproducible() {
        let ds = small_dataset();
        let config = quick_config(Algorithm::Maro);
        let a = run_experiment(&config, &ds).unwrap();
        let b = run_experiment(&config, &ds).unwrap();
        for (x, y) in a.reps.iter().zip(&b.reps) {
            assert_eq!(x.train_score, y.train_score);
            assert_eq!(x.validation_score, y.validation_score);
        }
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let ds = small_dataset();
        let mut config = quick_config(Algorithm::Sa);
        let serial = run_experiment(&config, &ds).unwrap();
        config.parallel = true;
        let parallel = run_experiment(&config, &ds).unwrap();
        for (x, y) in serial.reps.iter().zip(&parallel.reps) {
            assert_eq!(x.train_score, y.train_score);
        }
    }

    #[test]
    fn aggregate_matches_the_se_formula() {
        let agg = aggregate(&[1.0, 2.0, 3.0]);
        assert!((agg.mean - 2.0).abs() < 1e-12);
        assert!((agg.std_error - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(agg.min, 1.0);
        assert_eq!(agg.max, 3.0);
        let single = aggregate(&[5.0]);
        assert_eq!(single.std_error, 0.0);
        assert_eq!(single.mean, 5.0);
    }

    #[test]
    fn aggregates_are_recomputable_from_records() {
        let ds = small_dataset();
        let report = run_experiment(&quick_config(Algorithm::Sa), &ds).unwrap();
        let values: Vec<f64> = report.reps.iter().map(|r| r.train_score).collect();
        let again = aggregate(&values);
        assert!((again.mean - report.train.mean).abs() < 1e-12);
        assert!((again.std_error - report.train.std_error).abs() < 1e-12);
        assert!(report.train.mean >= report.train.min && report.train.mean <= report.train.max);
    }

    fn fake_report(family: &str, algorithm: Algorithm, mean: f64, se: f64) -> RunReport {
        let agg = Aggregate { mean, std_error: se, min: mean, max: mean };
        RunReport {
            dataset_name: family.into(),
            algorithm,
            objective: ScoreKind::LogOdds,
            init_note: INIT_NOTE,
            train_size: 1,
            iterations: 1,
            base_seed: 0,
            reps: vec![],
            train: agg,
            validation: Some(agg),
        }
    }

    #[test]
    fn summarize_formats_cells_like_the_result_tables() {
        let reports = vec![
            fake_report("Cytochrome C", Algorithm::Bw, 81.712, 0.0),
            fake_report("Cytochrome C", Algorithm::Aro, 90.984, 1.281),
        ];
        let table = summarize(&reports, Split::Train).unwrap();
        assert_eq!(table.cells[0][0], "81.71");
        assert_eq!(table.cells[0][1], "90.98±1.28");
        assert_eq!(table.algorithms, vec![Algorithm::Bw, Algorithm::Aro]);
    }

    #[test]
    fn summarize_rejects_mixed_objectives() {
        let mut a = fake_report("x", Algorithm::Bw, 1.0, 0.0);
        let b = fake_report("x", Algorithm::Sa, 1.0, 0.0);
        a.objective = ScoreKind::SumOfPairs;
        assert!(matches!(
            summarize(&[a, b], Split::Train),
            Err(ExperimentError::MixedObjectives)
        ));
    }

    #[test]
    fn summarize_rejects_duplicates_and_empty_input() {
        assert!(matches!(summarize(&[], Split::Train), Err(ExperimentError::EmptySummary)));
        let a = fake_report("x", Algorithm::Sa, 1.0, 0.1);
        let b = fake_report("x", Algorithm::Sa, 2.0, 0.1);
        assert!(matches!(
            summarize(&[a, b], Split::Train),
            Err(ExperimentError::DuplicateCell { .. })
        ));
    }

    #[test]
    fn csv_report_is_two_lines_for_one_cell() {
        let reports = vec![fake_report("fam", Algorithm::Bw, 81.71, 0.0)];
        let table = summarize(&reports, Split::Train).unwrap();
        let csv = emit_report(&table, OutputFormat::Csv);
        assert_eq!(csv, "family,BW\nfam,81.71\n");
        let md = emit_report(&table, OutputFormat::Markdown);
        assert!(md.contains("| fam | 81.71 |"));
    }

    #[test]
    fn csv_and_markdown_carry_the_same_numbers() {
        let reports = vec![
            fake_report("fam", Algorithm::Bw, 12.345, 0.0),
            fake_report("fam", Algorithm::Maro, 13.579, 0.246),
        ];
        let table = summarize(&reports, Split::Validation).unwrap();
        let csv = emit_report(&table, OutputFormat::Csv);
        let md = emit_report(&table, OutputFormat::Markdown);
        for cell in ["12.35", "13.58±0.25"] {
            assert!(csv.contains(cell));
            assert!(md.contains(cell));
        }
    }

    #[test]
    fn emitted_csv_is_byte_identical_across_runs() {
        let ds = small_dataset();
        let config = quick_config(Algorithm::Sa);
        let a = run_experiment(&config, &ds).unwrap();
        let b = run_experiment(&config, &ds).unwrap();
        let csv_a = emit_report(&summarize(&[a], Split::Train).unwrap(), OutputFormat::Csv);
        let csv_b = emit_report(&summarize(&[b], Split::Train).unwrap(), OutputFormat::Csv);
        assert_eq!(csv_a, csv_b);
    }
}
