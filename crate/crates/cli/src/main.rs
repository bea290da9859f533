//! `hmmbench` command line: train one model, run benchmark experiments,
//! score models or alignments, and generate synthetic datasets.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hmmbench_core::em::{history_csv, train_bw, TrainConfig};
use hmmbench_core::harness::{
    emit_report, run_experiment, summarize, Algorithm, ExperimentConfig, OutputFormat, Split,
};
use hmmbench_core::model_io::{read_model_path, write_model_path};
use hmmbench_core::objective::{align, log_odds, null_model, sop_raw, sop_reference, ColumnMismatch};
use hmmbench_core::optimize::{aro_run, maro_run, sa_run, trace_csv, SearchConfig};
use hmmbench_core::seqio::{
    read_alignment_fasta, read_fasta, synthesize, write_fasta, SequenceDataset,
};
use hmmbench_core::{
    model_from_vector, parameter_codec, HmmModel, HmmObjective, ModelShape, ScoreKind,
};

#[derive(Parser)]
#[command(
    name = "hmmbench",
    version,
    about = "Train, benchmark, and score hidden Markov models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on a FASTA dataset and emit the model plus a history CSV.
    Train(TrainArgs),
    /// Run repeated seeded experiments and emit a comparison table.
    Bench(BenchArgs),
    /// Score a model against a dataset, or a test alignment against a reference.
    Score(ScoreArgs),
    /// Generate a synthetic FASTA dataset from a model.
    Synth(SynthArgs),
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s).ok_or_else(|| format!("unknown algorithm '{s}' (bw, sa, aro, maro)"))
}

fn parse_objective(s: &str) -> Result<ScoreKind, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "log_odds" | "lo" => Ok(ScoreKind::LogOdds),
        "sop" | "sum_of_pairs" => Ok(ScoreKind::SumOfPairs),
        _ => Err(format!("unknown objective '{s}' (log-odds, sop)")),
    }
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    OutputFormat::parse(s).ok_or_else(|| format!("unknown format '{s}' (csv, markdown)"))
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).ok_or_else(|| format!("unknown split '{s}' (train, validation)"))
}

#[derive(Args)]
struct TrainArgs {
    /// FASTA dataset to train on (no split; the whole file is used).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_algorithm, default_value = "bw")]
    algorithm: Algorithm,
    #[arg(long, value_parser = parse_objective, default_value = "log-odds")]
    objective: ScoreKind,
    #[arg(long, default_value_t = 4)]
    states: usize,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integer bits per encoded variable (metaheuristic trainers).
    #[arg(long, default_value_t = 1)]
    int_bits: usize,
    /// Fraction bits per encoded variable (metaheuristic trainers).
    #[arg(long, default_value_t = 8)]
    frac_bits: usize,
    /// Restrict the dataset to this explicit alphabet.
    #[arg(long)]
    alphabet: Option<String>,
    /// Where to write the trained model (stdout when omitted).
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write the likelihood history / search trace CSV.
    #[arg(long)]
    history_out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct BenchArgs {
    /// Plain key=value file supplying defaults for any flag below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Row label for the dataset (defaults to the file stem).
    #[arg(long)]
    name: Option<String>,
    /// Comma-separated algorithms to compare.
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long, value_parser = parse_objective)]
    objective: Option<ScoreKind>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training-set size; the rest of the dataset becomes the validation set.
    /// Zero or absent trains on the whole dataset.
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    int_bits: Option<usize>,
    #[arg(long)]
    frac_bits: Option<usize>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    /// Run repetitions across threads.
    #[arg(long)]
    parallel: bool,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Model file to score (pairs with --data).
    #[arg(long, requires = "data", conflicts_with_all = ["test", "reference"])]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_parser = parse_objective, default_value = "log-odds")]
    objective: ScoreKind,
    /// Test alignment in aligned FASTA (pairs with --reference).
    #[arg(long, requires = "reference")]
    test: Option<PathBuf>,
    /// Reference alignment in aligned FASTA.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator model file; a random model is drawn when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    states: usize,
    #[arg(long, default_value_t = 4)]
    symbols: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 20)]
    min_len: usize,
    #[arg(long, default_value_t = 40)]
    max_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output FASTA path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Score(args) => cmd_score(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_or_stdout(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn load_dataset(path: &Path, alphabet: Option<&str>) -> Result<SequenceDataset> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let chars: Option<Vec<char>> = alphabet.map(|a| a.to_ascii_uppercase().chars().collect());
    read_fasta(std::io::BufReader::new(file), chars.as_deref())
        .with_context(|| format!("parsing {}", path.display()))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let dataset = load_dataset(&args.data, args.alphabet.as_deref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (model, history) = match args.algorithm {
        Algorithm::Bw => {
            let init = HmmModel::random_discrete(args.states, dataset.alphabet.len(), &mut rng);
            let config = TrainConfig {
                max_iterations: args.iterations,
                ..TrainConfig::default()
            };
            let (model, history) = train_bw(&init, &dataset.indexed, &config)?;
            (model, history_csv(&history))
        }
        Algorithm::Sa | Algorithm::Aro | Algorithm::Maro => {
            let shape = ModelShape::Discrete {
                n_states: args.states,
                n_symbols: dataset.alphabet.len(),
            };
            let mut objective = HmmObjective::new(shape, args.objective, &dataset)?;
            let codec = parameter_codec(&shape, args.int_bits, args.frac_bits);
            let config = SearchConfig {
                iterations: args.iterations,
                ..SearchConfig::default()
            };
            let run = match args.algorithm {
                Algorithm::Sa => sa_run,
                Algorithm::Aro => aro_run,
                Algorithm::Maro => maro_run,
                Algorithm::Bw => unreachable!(),
            };
            let outcome = run(&mut objective, &codec, &config, &mut rng)?;
            eprintln!(
                "best {} fitness: {:.3}",
                args.objective,
                outcome.best_fitness
            );
            (
                model_from_vector(&shape, &outcome.best),
                trace_csv(&outcome.trace),
            )
        }
    };
    match &args.model_out {
        Some(p) => write_model_path(p, &model)?,
        None => print!("{}", hmmbench_core::model_io::model_to_string(&model)),
    }
    if let Some(p) = &args.history_out {
        std::fs::write(p, history).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Plain `key=value` config file; '#' starts a comment line.
fn read_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = HashMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), no + 1))?;
        map.insert(
            key.trim().replace('-', "_").to_ascii_lowercase(),
            value.trim().to_string(),
        );
    }
    Ok(map)
}

fn config_get<T, F>(file: &HashMap<String, String>, key: &str, parse: F) -> Result<Option<T>>
where
    F: Fn(&str) -> Result<T, String>,
{
    match file.get(key) {
        Some(raw) => parse(raw)
            .map(Some)
            .map_err(|e| anyhow!("config key '{key}': {e}")),
        None => Ok(None),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => HashMap::new(),
    };
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| e.to_string());
    let parse_u64 = |s: &str| s.parse::<u64>().map_err(|e| e.to_string());

    let data = args
        .data
        .or(file.get("data").map(PathBuf::from))
        .ok_or_else(|| anyhow!("--data is required (flag or config file)"))?;
    let name = args
        .name
        .or(file.get("name").cloned())
        .unwrap_or_else(|| {
            data.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string())
        });
    let algorithms_raw = args
        .algorithms
        .or(file.get("algorithms").cloned())
        .unwrap_or_else(|| "bw,sa,aro,maro".to_string());
    let algorithms: Vec<Algorithm> = algorithms_raw
        .split(',')
        .map(|s| parse_algorithm(s.trim()).map_err(|e| anyhow!(e)))
        .collect::<Result<_>>()?;
    if algorithms.is_empty() {
        bail!("no algorithms requested");
    }
    let objective = match args.objective {
        Some(o) => o,
        None => config_get(&file, "objective", parse_objective)?.unwrap_or(ScoreKind::LogOdds),
    };
    let states = args
        .states
        .or(config_get(&file, "states", parse_usize)?)
        .unwrap_or(4);
    let iterations = args
        .iterations
        .or(config_get(&file, "iterations", parse_usize)?)
        .unwrap_or(2000);
    let repetitions = args
        .repetitions
        .or(config_get(&file, "repetitions", parse_usize)?)
        .unwrap_or(25);
    let seed = args
        .seed
        .or(config_get(&file, "seed", parse_u64)?)
        .unwrap_or(0);
    let train_size = args
        .train_size
        .or(config_get(&file, "train_size", parse_usize)?)
        .unwrap_or(0);
    let int_bits = args
        .int_bits
        .or(config_get(&file, "int_bits", parse_usize)?)
        .unwrap_or(1);
    let frac_bits = args
        .frac_bits
        .or(config_get(&file, "frac_bits", parse_usize)?)
        .unwrap_or(8);
    let format = match args.format {
        Some(f) => f,
        None => config_get(&file, "format", parse_format)?.unwrap_or(OutputFormat::Markdown),
    };
    let split = match args.split {
        Some(s) => s,
        None => config_get(&file, "split", parse_split)?.unwrap_or(Split::Train),
    };
    let parallel = args.parallel
        || config_get(&file, "parallel", |s| {
            s.parse::<bool>().map_err(|e| e.to_string())
        })?
        .unwrap_or(false);

    let dataset = load_dataset(&data, None)?;
    let mut reports = Vec::with_capacity(algorithms.len());
    for algorithm in algorithms {
        let config = ExperimentConfig {
            dataset_name: name.clone(),
            algorithm,
            objective,
            n_states: states,
            iterations,
            repetitions,
            base_seed: seed,
            train_size,
            int_bits,
            frac_bits,
            parallel,
        };
        eprintln!("running {algorithm} on '{name}' ({} reps)...", if algorithm.is_deterministic() { 1 } else { repetitions });
        reports.push(run_experiment(&config, &dataset)?);
    }
    let table = summarize(&reports, split)?;
    let mut rendered = emit_report(&table, format);
    if format == OutputFormat::Markdown {
        rendered.push_str(&format!(
            "\nobjective={} split={} {}\n",
            table.objective,
            match split {
                Split::Train => "train",
                Split::Validation => "validation",
            },
            reports[0].init_note,
        ));
    }
    write_or_stdout(args.out.as_deref(), &rendered)
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    match (&args.model, &args.test) {
        (Some(model_path), None) => {
            let data = args.data.as_ref().expect("clap enforces --data");
            let model = read_model_path(model_path)?;
            let dataset = load_dataset(data, None)?;
            let value = match args.objective {
                ScoreKind::LogOdds => {
                    let null = null_model(&dataset.indexed, dataset.alphabet.len())?;
                    log_odds(&model, &null, &dataset.indexed)?
                }
                ScoreKind::SumOfPairs => {
                    let alignment = align(&model, &dataset.indexed, &dataset.alphabet)?;
                    sop_raw(&alignment, &ColumnMismatch)?
                }
            };
            println!("{value:.3}");
            Ok(())
        }
        (None, Some(test_path)) => {
            let reference_path = args.reference.as_ref().expect("clap enforces --reference");
            let (_, test) = read_alignment_fasta(std::io::BufReader::new(
                std::fs::File::open(test_path)
                    .with_context(|| format!("opening {}", test_path.display()))?,
            ))?;
            let (_, reference) = read_alignment_fasta(std::io::BufReader::new(
                std::fs::File::open(reference_path)
                    .with_context(|| format!("opening {}", reference_path.display()))?,
            ))?;
            let value = sop_reference(&test, &reference)?;
            println!("{value:.3}");
            Ok(())
        }
        _ => bail!("score needs either --model with --data, or --test with --reference"),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let model = match &args.model {
        Some(p) => read_model_path(p)?,
        None => HmmModel::random_discrete(args.states, args.symbols, &mut rng),
    };
    let dataset = synthesize(&model, args.count, args.min_len, args.max_len, None, &mut rng)?;
    let mut buf = Vec::new();
    write_fasta(&mut buf, &dataset)?;
    write_or_stdout(args.out.as_deref(), &String::from_utf8(buf)?)?;
    eprintln!("{}", dataset.manifest(None));
    Ok(())
}
