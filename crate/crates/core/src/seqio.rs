//! Sequence ingestion: FASTA reading/writing, alphabet indexing, dataset
//! splitting, and synthetic dataset generation.

use std::io::{self, BufRead, Write};

use rand::Rng;

use crate::model::{HmmModel, ObservationSequence};
use crate::objective::Alignment;

#[derive(Debug)]
pub enum FastaError {
    Io(io::Error),
    EmptyInput,
    DataBeforeHeader { line: usize },
    EmptyRecord { name: String },
    SymbolOutsideAlphabet { record: String, symbol: char },
    BadSplit { train_size: usize, dataset: usize },
    EmptySynthesis,
    AlphabetTooLarge { k: usize },
    RequiresDiscreteModel,
}

impl std::fmt::Display for FastaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FastaError::Io(e) => write!(f, "i/o error: {e}"),
            FastaError::EmptyInput => write!(f, "input contains no FASTA records"),
            FastaError::DataBeforeHeader { line } => {
                write!(f, "line {line}: sequence data before any '>' header")
            }
            FastaError::EmptyRecord { name } => write!(f, "record '{name}' is empty"),
            FastaError::SymbolOutsideAlphabet { record, symbol } => {
                write!(f, "record '{record}': symbol '{symbol}' is outside the alphabet")
            }
            FastaError::BadSplit { train_size, dataset } => {
                write!(f, "train size {train_size} is outside [1, {dataset}]")
            }
            FastaError::EmptySynthesis => write!(f, "cannot synthesize an empty dataset"),
            FastaError::AlphabetTooLarge { k } => {
                write!(f, "no default alphabet for {k} symbols; supply one explicitly")
            }
            FastaError::RequiresDiscreteModel => {
                write!(f, "sequence synthesis requires a discrete generator model")
            }
        }
    }
}

impl std::error::Error for FastaError {}

impl From<io::Error> for FastaError {
    fn from(e: io::Error) -> Self {
        FastaError::Io(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub name: String,
    pub raw: String,
}

/// Named raw sequences plus their indexed form over an ordered alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub records: Vec<SequenceRecord>,
    /// Ordered distinct symbols; index `i` encodes `alphabet[i]`.
    pub alphabet: Vec<char>,
    /// Indexed sequences, parallel to `records`.
    pub indexed: Vec<ObservationSequence>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Build a dataset from records, inferring the alphabet as the sorted
    /// distinct symbol set unless an explicit one is supplied.
    pub fn from_records(
        records: Vec<SequenceRecord>,
        alphabet: Option<&[char]>,
    ) -> Result<Self, FastaError> {
        if records.is_empty() {
            return Err(FastaError::EmptyInput);
        }
        for r in &records {
            if r.raw.is_empty() {
                return Err(FastaError::EmptyRecord { name: r.name.clone() });
            }
        }
        let alphabet: Vec<char> = match alphabet {
            Some(a) => a.to_vec(),
            None => {
                let mut symbols: Vec<char> =
                    records.iter().flat_map(|r| r.raw.chars()).collect();
                symbols.sort_unstable();
                symbols.dedup();
                symbols
            }
        };
        let indexed = records
            .iter()
            .map(|r| {
                r.raw
                    .chars()
                    .map(|c| {
                        alphabet.iter().position(|&a| a == c).ok_or_else(|| {
                            FastaError::SymbolOutsideAlphabet {
                                record: r.name.clone(),
                                symbol: c,
                            }
                        })
                    })
                    .collect::<Result<Vec<usize>, _>>()
                    .map(ObservationSequence::Symbols)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SequenceDataset {
            records,
            alphabet,
            indexed,
        })
    }

    /// Sample `train_size` records uniformly without replacement into a
    /// training set; the validation set is everything else. Both halves keep
    /// the full original alphabet.
    pub fn split<R: Rng + ?Sized>(
        &self,
        train_size: usize,
        rng: &mut R,
    ) -> Result<(SequenceDataset, SequenceDataset), FastaError> {
        if train_size < 1 || train_size > self.len() {
            return Err(FastaError::BadSplit {
                train_size,
                dataset: self.len(),
            });
        }
        let mut picked: Vec<usize> =
            rand::seq::index::sample(rng, self.len(), train_size).into_vec();
        picked.sort_unstable();
        let mut in_train = vec![false; self.len()];
        for &i in &picked {
            in_train[i] = true;
        }
        let subset = |keep: bool| -> SequenceDataset {
            let records: Vec<SequenceRecord> = self
                .records
                .iter()
                .zip(&in_train)
                .filter(|(_, &t)| t == keep)
                .map(|(r, _)| r.clone())
                .collect();
            let indexed: Vec<ObservationSequence> = self
                .indexed
                .iter()
                .zip(&in_train)
                .filter(|(_, &t)| t == keep)
                .map(|(o, _)| o.clone())
                .collect();
            SequenceDataset {
                records,
                alphabet: self.alphabet.clone(),
                indexed,
            }
        };
        Ok((subset(true), subset(false)))
    }

    /// One-line dataset summary: count, mean/min/max length, and optionally
    /// the training-set size.
    pub fn manifest(&self, train_size: Option<usize>) -> String {
        let lens: Vec<usize> = self.records.iter().map(|r| r.raw.chars().count()).collect();
        let min = lens.iter().min().copied().unwrap_or(0);
        let max = lens.iter().max().copied().unwrap_or(0);
        let mean = if lens.is_empty() {
            0.0
        } else {
            lens.iter().sum::<usize>() as f64 / lens.len() as f64
        };
        let mut line = format!("N={} LSEQ={:.0} ({min}, {max})", self.len(), mean);
        if let Some(t) = train_size {
            line.push_str(&format!(" T={t}"));
        }
        line
    }
}

/// Shared FASTA record scanner: headers start records, data lines are
/// case-folded to upper case with all whitespace stripped.
fn read_records<R: BufRead>(reader: R) -> Result<Vec<SequenceRecord>, FastaError> {
    let mut records: Vec<SequenceRecord> = Vec::new();
    let mut current: Option<SequenceRecord> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('>') {
            if let Some(rec) = current.take() {
                records.push(rec);
            }
            current = Some(SequenceRecord {
                name: header.trim().to_string(),
                raw: String::new(),
            });
        } else {
            match current.as_mut() {
                Some(rec) => rec.raw.extend(
                    trimmed
                        .chars()
                        .filter(|c| !c.is_whitespace())
                        .map(|c| c.to_ascii_uppercase()),
                ),
                None => return Err(FastaError::DataBeforeHeader { line: lineno + 1 }),
            }
        }
    }
    if let Some(rec) = current.take() {
        records.push(rec);
    }
    if records.is_empty() {
        return Err(FastaError::EmptyInput);
    }
    Ok(records)
}

/// Parse FASTA. An explicit alphabet rejects out-of-alphabet symbols,
/// otherwise the alphabet is inferred as the sorted distinct symbol set.
pub fn read_fasta<R: BufRead>(
    reader: R,
    alphabet: Option<&[char]>,
) -> Result<SequenceDataset, FastaError> {
    SequenceDataset::from_records(read_records(reader)?, alphabet)
}

pub fn read_fasta_path(path: &std::path::Path) -> Result<SequenceDataset, FastaError> {
    let file = std::fs::File::open(path)?;
    read_fasta(io::BufReader::new(file), None)
}

/// Write records as FASTA, one sequence line per record.
pub fn write_fasta<W: Write>(w: &mut W, dataset: &SequenceDataset) -> io::Result<()> {
    for r in &dataset.records {
        writeln!(w, ">{}", r.name)?;
        writeln!(w, "{}", r.raw)?;
    }
    Ok(())
}

/// Read an aligned FASTA file: '-' is the gap; rows must share one width.
pub fn read_alignment_fasta<R: BufRead>(
    reader: R,
) -> Result<(Vec<String>, Alignment), FastaError> {
    let records = read_records(reader)?;
    let names = records.iter().map(|r| r.name.clone()).collect();
    let rows: Vec<String> = records.into_iter().map(|r| r.raw).collect();
    let alignment = Alignment::new(rows).map_err(|e| {
        FastaError::Io(io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    })?;
    Ok((names, alignment))
}

pub fn write_alignment_fasta<W: Write>(
    w: &mut W,
    names: &[String],
    alignment: &Alignment,
) -> io::Result<()> {
    for (name, row) in names.iter().zip(alignment.rows()) {
        writeln!(w, ">{name}")?;
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Default alphabet for a given size: DNA for 4, the twenty amino-acid
/// letters for 20, otherwise a prefix of the Latin alphabet.
pub fn default_alphabet(k: usize) -> Result<Vec<char>, FastaError> {
    match k {
        4 => Ok("ACGT".chars().collect()),
        20 => Ok("ACDEFGHIKLMNPQRSTVWY".chars().collect()),
        _ if (1..=26).contains(&k) => Ok(('A'..).take(k).collect()),
        _ => Err(FastaError::AlphabetTooLarge { k }),
    }
}

/// Generate `count` sequences from a discrete model with lengths drawn
/// uniformly from `[min_len, max_len]`. Records are named `syn_0001`,
/// `syn_0002`, ...
pub fn synthesize<R: Rng + ?Sized>(
    generator: &HmmModel,
    count: usize,
    min_len: usize,
    max_len: usize,
    alphabet: Option<&[char]>,
    rng: &mut R,
) -> Result<SequenceDataset, FastaError> {
    if count == 0 {
        return Err(FastaError::EmptySynthesis);
    }
    assert!(min_len >= 1 && min_len <= max_len, "bad length range");
    let k = match &generator.emission {
        crate::model::EmissionModel::Discrete { table } => table.ncols(),
        crate::model::EmissionModel::GaussianMixture { .. } => {
            return Err(FastaError::RequiresDiscreteModel)
        }
    };
    let alphabet = match alphabet {
        Some(a) => a.to_vec(),
        None => default_alphabet(k)?,
    };
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let len = rng.random_range(min_len..=max_len);
        let (_, obs) = crate::sample::sample(generator, len, rng);
        let symbols = match obs {
            ObservationSequence::Symbols(s) => s,
            _ => unreachable!("generator is discrete"),
        };
        let raw: String = symbols.iter().map(|&s| alphabet[s]).collect();
        records.push(SequenceRecord {
            name: format!("syn_{:04}", i + 1),
            raw,
        });
    }
    SequenceDataset::from_records(records, Some(&alphabet))
}
