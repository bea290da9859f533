//! Fitness functions over sequence datasets: log-odds against a null model
//! and sum-of-pairs over alignments built from Viterbi paths.

use std::collections::{HashMap, HashSet};

use ndarray::Array2;

use crate::inference::{forward, viterbi, InferenceError};
use crate::model::{EmissionModel, HmmModel, ObservationSequence};

/// Gap character used in alignments and aligned FASTA.
pub const GAP: char = '-';

#[derive(Debug)]
pub enum ScoreError {
    EmptyDataset,
    /// The null model assigns probability zero to a scored sequence.
    DegenerateNull { index: usize },
    RequiresSymbols,
    /// Viterbi found no positive-probability path for the named sequence.
    UndecodableSequence { index: usize },
    RaggedRows { row: usize, width: usize, expected: usize },
    TooFewRows { rows: usize },
    /// The two alignments do not contain the same underlying sequences.
    AlignmentMismatch(String),
    SymbolOutOfAlphabet { index: usize, symbol: usize },
    Inference(InferenceError),
}

impl std::fmt::Display for ScoreError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreError::EmptyDataset => write!(f, "dataset is empty"),
            ScoreError::DegenerateNull { index } => {
                write!(f, "degenerate null: sequence {index} has probability zero under the null model")
            }
            ScoreError::RequiresSymbols => write!(f, "operation requires discrete symbol sequences"),
            ScoreError::UndecodableSequence { index } => {
                write!(f, "sequence {index} has no positive-probability state path")
            }
            ScoreError::RaggedRows { row, width, expected } => {
                write!(f, "alignment row {row} has width {width}, expected {expected}")
            }
            ScoreError::TooFewRows { rows } => {
                write!(f, "sum-of-pairs needs at least 2 rows, got {rows}")
            }
            ScoreError::AlignmentMismatch(msg) => write!(f, "alignment mismatch: {msg}"),
            ScoreError::SymbolOutOfAlphabet { index, symbol } => {
                write!(f, "sequence {index}: symbol {symbol} is outside the alphabet")
            }
            ScoreError::Inference(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ScoreError {}

impl From<InferenceError> for ScoreError {
    fn from(e: InferenceError) -> Self {
        ScoreError::Inference(e)
    }
}

/// Gapped rows of equal width; removing the gaps from row `i` reproduces
/// input sequence `i` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    rows: Vec<String>,
    width: usize,
}

impl Alignment {
    pub fn new(rows: Vec<String>) -> Result<Self, ScoreError> {
        if rows.is_empty() {
            return Err(ScoreError::EmptyDataset);
        }
        let width = rows[0].chars().count();
        for (i, row) in rows.iter().enumerate() {
            let w = row.chars().count();
            if w != width {
                return Err(ScoreError::RaggedRows {
                    row: i,
                    width: w,
                    expected: width,
                });
            }
        }
        Ok(Alignment { rows, width })
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row `i` with all gap characters removed.
    pub fn degapped(&self, i: usize) -> String {
        self.rows[i].chars().filter(|&c| c != GAP).collect()
    }
}

/// Distance between two equal-width gapped rows. Implementations must be
/// symmetric, non-negative, and zero on identical rows.
pub trait PairDistance {
    fn distance(&self, a: &str, b: &str) -> f64;
    fn name(&self) -> &'static str;
}

/// Column-wise mismatch count: 0 for identical symbols or gap-vs-gap, 1 for a
/// mismatch or residue-vs-gap.
#[derive(Debug, Clone, Copy, Default)]
pub struct ColumnMismatch;

impl PairDistance for ColumnMismatch {
    fn distance(&self, a: &str, b: &str) -> f64 {
        a.chars()
            .zip(b.chars())
            .map(|(x, y)| {
                if x == y {
                    0.0
                } else if x == GAP || y == GAP {
                    1.0
                } else {
                    1.0
                }
            })
            .sum()
    }

    fn name(&self) -> &'static str {
        "column-mismatch"
    }
}

/// Single-state null model with Laplace-smoothed empirical symbol
/// frequencies (pseudocount one per symbol) over the whole dataset.
pub fn null_model(dataset: &[ObservationSequence], k: usize) -> Result<HmmModel, ScoreError> {
    if dataset.is_empty() || k == 0 {
        return Err(ScoreError::EmptyDataset);
    }
    let mut counts = vec![1.0f64; k];
    let mut total = k as f64;
    for (i, obs) in dataset.iter().enumerate() {
        let symbols = match obs {
            ObservationSequence::Symbols(s) => s,
            ObservationSequence::Vectors(_) => return Err(ScoreError::RequiresSymbols),
        };
        for &s in symbols {
            if s >= k {
                return Err(ScoreError::SymbolOutOfAlphabet { index: i, symbol: s });
            }
            counts[s] += 1.0;
            total += 1.0;
        }
    }
    for c in &mut counts {
        *c /= total;
    }
    Ok(HmmModel {
        initial: vec![1.0],
        transition: Array2::from_elem((1, 1), 1.0),
        emission: EmissionModel::Discrete {
            table: Array2::from_shape_vec((1, k), counts).expect("shape"),
        },
    })
}

/// Mean per-sequence base-2 log-likelihood ratio of the model against the
/// null model.
///
/// A sequence that is impossible under `model` drives the score to `-inf`;
/// one that is impossible under `null` is an error.
pub fn log_odds(
    model: &HmmModel,
    null: &HmmModel,
    dataset: &[ObservationSequence],
) -> Result<f64, ScoreError> {
    if dataset.is_empty() {
        return Err(ScoreError::EmptyDataset);
    }
    let mut total = 0.0;
    for (i, obs) in dataset.iter().enumerate() {
        let ll_null = forward(null, obs)?.log_likelihood;
        if ll_null == f64::NEG_INFINITY {
            return Err(ScoreError::DegenerateNull { index: i });
        }
        let ll = forward(model, obs)?.log_likelihood;
        total += (ll - ll_null) / std::f64::consts::LN_2;
    }
    Ok(total / dataset.len() as f64)
}

/// Label every residue of every sequence with (state, visit number) along its
/// Viterbi path and merge the label streams into columns: the k-th visit to a
/// state defines one column shared by every sequence whose path reaches that
/// visit, provided the orders agree; conflicting orders fall back to emitting
/// the column for the sequences whose label is at the front.
pub fn align(
    model: &HmmModel,
    seqs: &[ObservationSequence],
    alphabet: &[char],
) -> Result<Alignment, ScoreError> {
    if seqs.is_empty() {
        return Err(ScoreError::EmptyDataset);
    }
    let mut labels: Vec<Vec<(usize, usize)>> = Vec::with_capacity(seqs.len());
    let mut residues: Vec<Vec<char>> = Vec::with_capacity(seqs.len());
    for (i, obs) in seqs.iter().enumerate() {
        let symbols = match obs {
            ObservationSequence::Symbols(s) => s,
            ObservationSequence::Vectors(_) => return Err(ScoreError::RequiresSymbols),
        };
        let (path, log_prob) = viterbi(model, obs)?;
        if log_prob == f64::NEG_INFINITY {
            return Err(ScoreError::UndecodableSequence { index: i });
        }
        let mut visit_count: HashMap<usize, usize> = HashMap::new();
        let labeled: Vec<(usize, usize)> = path
            .states
            .iter()
            .map(|&s| {
                let v = visit_count.entry(s).or_insert(0);
                *v += 1;
                (s, *v)
            })
            .collect();
        labels.push(labeled);
        let chars: Vec<char> = symbols
            .iter()
            .map(|&s| {
                alphabet.get(s).copied().ok_or(ScoreError::SymbolOutOfAlphabet {
                    index: i,
                    symbol: s,
                })
            })
            .collect::<Result<_, _>>()?;
        residues.push(chars);
    }

    // position of each label within each sequence (labels are unique per path)
    let positions: Vec<HashMap<(usize, usize), usize>> = labels
        .iter()
        .map(|ls| ls.iter().enumerate().map(|(p, &l)| (l, p)).collect())
        .collect();

    let n = seqs.len();
    let mut cursors = vec![0usize; n];
    let mut rows: Vec<String> = vec![String::new(); n];
    loop {
        let fronts: Vec<Option<(usize, usize)>> = (0..n)
            .map(|i| labels[i].get(cursors[i]).copied())
            .collect();
        if fronts.iter().all(Option::is_none) {
            break;
        }
        // a front label is ready when no sequence still holds it deeper in
        // its remaining stream
        let mut chosen: Option<(usize, usize)> = None;
        for front in fronts.iter().flatten() {
            let ready = (0..n).all(|j| match positions[j].get(front) {
                Some(&p) => p <= cursors[j],
                None => true,
            });
            if ready {
                chosen = Some(*front);
                break;
            }
        }
        let label = chosen.unwrap_or_else(|| {
            fronts
                .iter()
                .flatten()
                .next()
                .copied()
                .expect("at least one active sequence")
        });
        for i in 0..n {
            if fronts[i] == Some(label) {
                rows[i].push(residues[i][cursors[i]]);
                cursors[i] += 1;
            } else {
                rows[i].push(GAP);
            }
        }
    }
    Alignment::new(rows)
}

/// Sum of pairwise distances over all row pairs.
pub fn sop_raw(alignment: &Alignment, metric: &dyn PairDistance) -> Result<f64, ScoreError> {
    let n = alignment.n_rows();
    if n < 2 {
        return Err(ScoreError::TooFewRows { rows: n });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += metric.distance(&alignment.rows[i], &alignment.rows[j]);
        }
    }
    Ok(total)
}

/// All aligned residue pairs of an alignment, as
/// `(row_i, residue_ordinal_i, row_j, residue_ordinal_j)` with `i < j`.
fn residue_pairs(alignment: &Alignment) -> HashSet<(usize, usize, usize, usize)> {
    let n = alignment.n_rows();
    let grids: Vec<Vec<Option<usize>>> = alignment
        .rows
        .iter()
        .map(|row| {
            let mut ordinal = 0usize;
            row.chars()
                .map(|c| {
                    if c == GAP {
                        None
                    } else {
                        let o = ordinal;
                        ordinal += 1;
                        Some(o)
                    }
                })
                .collect()
        })
        .collect();
    let mut pairs = HashSet::new();
    for col in 0..alignment.width {
        for i in 0..n {
            let Some(oi) = grids[i][col] else { continue };
            for (grid_j, j) in grids.iter().zip(0..).skip(i + 1) {
                if let Some(oj) = grid_j[col] {
                    pairs.insert((i, oi, j, oj));
                }
            }
        }
    }
    pairs
}

/// Fraction of the reference alignment's aligned residue pairs that are also
/// aligned in the test alignment; 1.0 when every pair is reproduced.
pub fn sop_reference(test: &Alignment, reference: &Alignment) -> Result<f64, ScoreError> {
    if test.n_rows() != reference.n_rows() {
        return Err(ScoreError::AlignmentMismatch(format!(
            "{} rows vs {} rows",
            test.n_rows(),
            reference.n_rows()
        )));
    }
    for i in 0..test.n_rows() {
        if test.degapped(i) != reference.degapped(i) {
            return Err(ScoreError::AlignmentMismatch(format!(
                "row {i} holds different sequences"
            )));
        }
    }
    let ref_pairs = residue_pairs(reference);
    if ref_pairs.is_empty() {
        return Ok(1.0);
    }
    let test_pairs = residue_pairs(test);
    let recovered = ref_pairs.iter().filter(|p| test_pairs.contains(p)).count();
    Ok(recovered as f64 / ref_pairs.len() as f64)
}
