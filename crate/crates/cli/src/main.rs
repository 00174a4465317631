mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sparql_vocab::attention::{gradient_check, Activation, AttentionInputs, GradCheckOptions, Matrix, PrefixParams, Quadratic};
use sparql_vocab::dataset::{load_grailqa, SplitSpec};
use sparql_vocab::eval::classify_error;
use sparql_vocab::eval::harness::{evaluate_predictions, load_gold, load_predictions};
use sparql_vocab::pipeline::{render_stats_table, run_preprocess, vocab_stats, PreparedCorpus, PreprocessConfig};
use sparql_vocab::subword::SENTENCEPIECE_MARKER;
use sparql_vocab::wordlist::parse_wordlist;
use sparql_vocab::{MaskingConfig, Scheme, SubstitutionMap, SubwordModel, TokenSequence};

#[derive(Parser)]
#[command(name = "sparql-vocab", version, about = "Masked SPARQL preprocessing, vocabulary substitution and evaluation")]
struct Cli {
    /// JSON file with per-subcommand defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mask, substitute, split and export a GrailQA-format file.
    Preprocess(PreprocessArgs),
    /// Tokenizer statistics (TSVS, ALFL, compression ratios) per scheme.
    Stats(StatsArgs),
    /// Score a predictions file against an exported split.
    Evaluate(EvaluateArgs),
    /// Classify one masked prediction against its gold query.
    Classify(ClassifyArgs),
    /// Finite-difference check of the prefix-attention gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// original, dictionary, char1, char2, char4 or char8.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Explicit split sizes TRAIN,DEV,TEST (default: GrailQA proportions).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    split: Option<Vec<usize>>,
    #[arg(long)]
    masking_config: Option<PathBuf>,
    /// Replacement words for the dictionary scheme, one per line.
    #[arg(long)]
    wordlist: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Subword piece list (one piece per line, optional tab-separated score).
    /// Without it a character-level model is used.
    #[arg(long)]
    pieces: Option<PathBuf>,
    /// Word-start marker of the piece vocabulary; "none" disables it.
    #[arg(long)]
    boundary_marker: Option<String>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    masking_config: Option<PathBuf>,
    #[arg(long)]
    wordlist: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Exported split, `{"id","input","target"}` per line.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Predictions, `{"id","prediction"}` per line.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// map.json written by preprocess.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    pred: String,
    #[arg(long)]
    gold: String,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    max_d: Option<usize>,
    #[arg(long)]
    max_c: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// tanh, relu or identity.
    #[arg(long)]
    activation: Option<String>,
    /// Check this parameter file instead of random parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

/// Bad invocation: exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("--{flag} is required (on the command line or in --config)")))
}

fn existing_file(path: PathBuf, flag: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(usage(format!("--{flag}: {} does not exist", path.display())))
    }
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    s.parse().map_err(|e: sparql_vocab::SubstitutionError| usage(e.to_string()))
}

fn masking_config(path: Option<PathBuf>) -> Result<MaskingConfig> {
    match path {
        Some(p) => MaskingConfig::from_file(existing_file(p, "masking-config")?).context("loading masking config"),
        None => Ok(MaskingConfig::default()),
    }
}

fn wordlist(path: Option<PathBuf>) -> Result<Option<(String, Vec<String>)>> {
    let Some(path) = path else { return Ok(None) };
    let path = existing_file(path, "wordlist")?;
    let text = std::fs::read_to_string(&path)?;
    let version = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    Ok(Some((version, parse_wordlist(&text))))
}

fn preprocess(args: PreprocessArgs, cfg: config::PreprocessSection) -> Result<()> {
    let dataset = existing_file(required(args.dataset.or(cfg.dataset), "dataset")?, "dataset")?;
    let out_dir = required(args.out.or(cfg.out), "out")?;
    let scheme = parse_scheme(&args.scheme.or(cfg.scheme).unwrap_or_else(|| "original".into()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let split = args
        .split
        .map(|v| [v[0], v[1], v[2]])
        .or(cfg.split)
        .map(|[train_n, dev_n, test_n]| SplitSpec { train_n, dev_n, test_n, seed });
    let config = PreprocessConfig {
        dataset,
        out_dir,
        scheme,
        seed,
        split,
        masking: masking_config(args.masking_config.or(cfg.masking_config))?,
        wordlist: wordlist(args.wordlist.or(cfg.wordlist))?,
    };
    let manifest = run_preprocess(&config)?;
    println!(
        "{} records used ({} malformed, {} rejected); vocabulary {} words ({:+} vs {}); split {}/{}/{}",
        manifest.records_used,
        manifest.records_malformed,
        manifest.records_rejected,
        manifest.vocab_size,
        manifest.vocab_size_delta,
        manifest.reference_vocab_size,
        manifest.split.train_n,
        manifest.split.dev_n,
        manifest.split.test_n,
    );
    println!("wrote {}", config.out_dir.display());
    Ok(())
}

fn stats(args: StatsArgs, cfg: config::StatsSection) -> Result<()> {
    let dataset = existing_file(required(args.dataset.or(cfg.dataset), "dataset")?, "dataset")?;
    let marker = match args.boundary_marker.or(cfg.boundary_marker) {
        Some(m) if m == "none" || m.is_empty() => None,
        Some(m) => Some(m),
        None => Some(SENTENCEPIECE_MARKER.to_owned()),
    };
    let model = match args.pieces.or(cfg.pieces) {
        Some(p) => SubwordModel::from_piece_file(existing_file(p, "pieces")?, marker)?,
        None => {
            log::warn!("no --pieces given; using a character-level model");
            SubwordModel::ascii_characters(marker)
        }
    };
    let schemes = match args.schemes.or(cfg.schemes) {
        Some(names) => names.iter().map(|s| parse_scheme(s)).collect::<Result<Vec<_>>>()?,
        None => Scheme::ALL.to_vec(),
    };
    let masking = masking_config(args.masking_config.or(cfg.masking_config))?;
    let words = wordlist(args.wordlist.or(cfg.wordlist))?;
    let loaded = load_grailqa(&dataset)?;
    let corpus = PreparedCorpus::new(&loaded.records, &masking, &dataset.display().to_string());
    if corpus.records.is_empty() {
        bail!("no usable records in {}", dataset.display());
    }
    let rows = vocab_stats(
        &corpus,
        &model,
        &schemes,
        args.seed.or(cfg.seed).unwrap_or(0),
        words.as_ref().map(|(_, w)| w.as_slice()),
    )?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!(
            "{} queries, vocabulary {} words",
            corpus.records.len(),
            corpus.vocabulary.len()
        );
        print!("{}", render_stats_table(&rows));
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs, cfg: config::EvaluateSection) -> Result<()> {
    let gold_path = existing_file(required(args.gold.or(cfg.gold), "gold")?, "gold")?;
    let pred_path = existing_file(required(args.predictions.or(cfg.predictions), "predictions")?, "predictions")?;
    let map_path = existing_file(required(args.map.or(cfg.map), "map")?, "map")?;
    let golds = load_gold(&gold_path)?;
    let preds = load_predictions(&pred_path)?;
    let map = SubstitutionMap::from_file(&map_path)?;
    let evaluation = evaluate_predictions(&golds, &preds, &map)?;
    print!("{}", evaluation.report.to_table(&evaluation.scheme));
    let unknown: usize = evaluation.records.iter().map(|r| r.unknown_tokens.len()).sum();
    if unknown > 0 {
        println!("{unknown} prediction tokens outside the replacement vocabulary");
    }
    if let Some(out) = args.out.or(cfg.out) {
        evaluation.write(&out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn classify(args: ClassifyArgs) -> Result<()> {
    let class = classify_error(
        &TokenSequence::from_whitespace(&args.pred),
        &TokenSequence::from_whitespace(&args.gold),
    );
    println!("{class}");
    Ok(())
}

#[derive(Serialize)]
struct GradcheckSummary {
    instances: usize,
    max_relative_deviation: f64,
    worst_instance: usize,
    tolerance: f64,
}

fn gradcheck(args: GradcheckArgs, cfg: config::GradcheckSection) -> Result<bool> {
    let defaults = GradCheckOptions::default();
    let opts = GradCheckOptions {
        step: args.step.or(cfg.step).unwrap_or(defaults.step),
        floor: args.floor.or(cfg.floor).unwrap_or(defaults.floor),
    };
    let tolerance = args.tolerance.or(cfg.tolerance).unwrap_or(1e-4);
    let activation = match args.activation.or(cfg.activation).as_deref() {
        None | Some("tanh") => Activation::Tanh,
        Some("relu") => Activation::Relu,
        Some("identity") => Activation::Identity,
        Some(other) => return Err(usage(format!("unknown activation {other:?}"))),
    };
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if let Some(path) = args.params {
        let p = PrefixParams::from_file(existing_file(path, "params")?)?;
        let d = p.d();
        let inp = AttentionInputs::random(3, 4, d, 1.0, &mut rng);
        let target = Matrix::from_fn(3, d, |_, _| rng.gen_range(-1.0..1.0));
        let report = gradient_check(&p, &inp, &Quadratic { target }, opts)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(report.max_relative_deviation <= tolerance);
    }

    let instances = args.instances.or(cfg.instances).unwrap_or(100);
    let max_d = args.max_d.or(cfg.max_d).unwrap_or(8);
    let max_c = args.max_c.or(cfg.max_c).unwrap_or(8);
    if max_d == 0 {
        return Err(usage("--max-d must be at least 1"));
    }
    let mut worst = (0.0f64, 0usize);
    for i in 0..instances {
        let d = rng.gen_range(1..=max_d);
        let c = rng.gen_range(0..=max_c);
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let inp = AttentionInputs::random(n, m, d, 1.0, &mut rng);
        let mut p = PrefixParams::random(d, c, 1.0, &mut rng);
        p.activation = activation;
        let target = Matrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        let report = gradient_check(&p, &inp, &Quadratic { target }, opts)
            .with_context(|| format!("instance {i} (d={d}, C={c})"))?;
        if report.max_relative_deviation > worst.0 {
            worst = (report.max_relative_deviation, i);
        }
    }
    let summary = GradcheckSummary {
        instances,
        max_relative_deviation: worst.0,
        worst_instance: worst.1,
        tolerance,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(worst.0 <= tolerance)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = config::load(cli.config.as_deref().map(Path::new)).map_err(|e| usage(format!("{e:#}")))?;
    match cli.command {
        Command::Preprocess(a) => preprocess(a, cfg.preprocess).map(|_| true),
        Command::Stats(a) => stats(a, cfg.stats).map(|_| true),
        Command::Evaluate(a) => evaluate(a, cfg.evaluate).map(|_| true),
        Command::Classify(a) => classify(a).map(|_| true),
        Command::Gradcheck(a) => gradcheck(a, cfg.gradcheck),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gradient check exceeded tolerance");
            ExitCode::from(1)
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
