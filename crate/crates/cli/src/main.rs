use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dialect_core::baseline::{BaselineModel, FeatureConfig, TrainConfig, BASELINE_LEARNING_RATE};
use dialect_core::config::RunConfig;
use dialect_core::corpus::{load_corpus, parse_fraction, save_corpus, split_corpus, CorpusFormat, SplitSpec};
use dialect_core::ensemble::{agreement_report, vote, TieBreak, VotePolicy, VoteStrategy};
use dialect_core::eval::{compare_models, evaluate, Average};
use dialect_core::predfile::{read_predictions, read_predictions_unaligned, write_predictions, write_submission};
use dialect_core::preprocess::{clean_corpus_with_stats, CleaningConfig};
use dialect_core::synthetic::{self, SyntheticConfig};
use dialect_core::{fsutil, pipeline, Error, Result};

/// Tweet dialect identification: clean, split, train, vote and score.
#[derive(Parser)]
#[command(name = "dialect-id", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove placeholder tokens (USER, NUM, URL) from a corpus.
    Clean(CleanArgs),
    /// Split a labeled corpus into train/dev/test with a seeded shuffle.
    Split(SplitArgs),
    /// Train the character n-gram softmax baseline.
    TrainBaseline(TrainArgs),
    /// Write a prediction file for a corpus with a trained baseline.
    Predict(PredictArgs),
    /// Combine aligned prediction files by voting.
    Ensemble(EnsembleArgs),
    /// Score one prediction file against gold labels.
    Evaluate(EvaluateArgs),
    /// Execute a full run described by a TOML config.
    Run(RunArgs),
    /// Tabulate several prediction files against the same gold labels.
    Report(ReportArgs),
    /// Generate a synthetic labeled corpus with class-marker words.
    Synth(SynthArgs),
}

#[derive(Args)]
struct FormatArg {
    /// Corpus format; inferred from the file extension when omitted.
    #[arg(long)]
    format: Option<CorpusFormat>,
}

impl FormatArg {
    fn for_path(&self, path: &Path) -> CorpusFormat {
        self.format.unwrap_or_else(|| CorpusFormat::from_path(path))
    }
}

#[derive(Args)]
struct CleanArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    format: FormatArg,
    /// Token to remove; repeat to build the list (default: USER, NUM, URL).
    #[arg(long = "noise-token", value_name = "TOKEN")]
    noise_tokens: Vec<String>,
    /// Leave whitespace runs as they are.
    #[arg(long)]
    no_collapse_whitespace: bool,
    /// Keep leading and trailing whitespace.
    #[arg(long)]
    no_trim: bool,
    /// Keep rows whose content is empty after cleaning.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    keep_empty: bool,
}

#[derive(Args)]
struct SplitArgs {
    input: PathBuf,
    /// Directory receiving train/dev/test files.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    format: FormatArg,
    /// Train, dev and test fractions, as decimals or a/b.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values = ["10/13", "1/13", "2/13"])]
    fractions: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// 10 epochs, lr 1e-5, batch 32.
    FineTune,
    /// 10 epochs, lr 1e-2, batch 32.
    Baseline,
}

#[derive(Args)]
struct TrainArgs {
    train: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "baseline")]
    profile: Profile,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    ngram_min: Option<usize>,
    #[arg(long)]
    ngram_max: Option<usize>,
    #[arg(long)]
    max_features: Option<usize>,
    /// Clean the training corpus with the default settings first.
    #[arg(long)]
    clean: bool,
}

#[derive(Args)]
struct PredictArgs {
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Model id written into the file (default: model file stem).
    #[arg(long)]
    model_id: Option<String>,
    #[command(flatten)]
    format: FormatArg,
    /// Clean the input with the default settings first.
    #[arg(long)]
    clean: bool,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Prediction files, at least two.
    #[arg(required = true, num_args = 2..)]
    predictions: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "hard")]
    strategy: VoteStrategy,
    #[arg(long, default_value = "model-priority")]
    tie_break: TieBreak,
    /// Model ids, highest priority first (default: argument order).
    #[arg(long, value_delimiter = ',')]
    priority: Vec<String>,
    /// Also write the bare label column here.
    #[arg(long)]
    submission: Option<PathBuf>,
    /// Print pairwise agreement and vote entropy.
    #[arg(long)]
    agreement: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Text,
    Tsv,
    Json,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, default_value = "macro")]
    average: Average,
    #[arg(long, default_value_t = 2)]
    digits: usize,
    #[arg(long = "output-format", value_enum, default_value = "text")]
    output: Output,
}

#[derive(Args)]
struct EvaluateArgs {
    gold: PathBuf,
    predictions: PathBuf,
    #[command(flatten)]
    format: FormatArg,
    #[command(flatten)]
    score: ScoreArgs,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, env = "DIALECT_ID_OUT")]
    out_dir: Option<PathBuf>,
    /// Reseed the split and every native backend (backend i gets SEED + i).
    #[arg(long)]
    seed: Option<u64>,
    /// Check the config and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct ReportArgs {
    gold: PathBuf,
    #[arg(required = true)]
    predictions: Vec<PathBuf>,
    #[arg(long, default_value = "")]
    title: String,
    #[command(flatten)]
    format: FormatArg,
    #[command(flatten)]
    score: ScoreArgs,
}

#[derive(Args)]
struct SynthArgs {
    output: PathBuf,
    #[arg(long, default_value_t = 18)]
    classes: usize,
    #[arg(long, default_value_t = 500)]
    per_class: usize,
    #[arg(long, default_value_t = 2023)]
    seed: u64,
}

fn cmd_clean(args: CleanArgs) -> Result<()> {
    let format = args.format.for_path(&args.input);
    let corpus = load_corpus(&args.input, format)?;
    let mut config = CleaningConfig {
        collapse_whitespace: !args.no_collapse_whitespace,
        trim: !args.no_trim,
        ..CleaningConfig::default()
    };
    if !args.noise_tokens.is_empty() {
        config.noise_tokens = args.noise_tokens;
    }
    config.validate()?;
    let (mut cleaned, stats) = clean_corpus_with_stats(&corpus, &config);
    if !args.keep_empty {
        cleaned = cleaned.retain(|e| !e.content.is_empty());
    }
    save_corpus(&cleaned, &args.output, args.format.for_path(&args.output))?;
    println!("examples processed: {}", stats.examples);
    println!("tokens removed: {}", stats.tokens_removed);
    println!("emptied contents: {}", stats.emptied);
    if !args.keep_empty {
        println!("rows written: {}", cleaned.len());
    }
    Ok(())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let format = args.format.for_path(&args.input);
    let corpus = load_corpus(&args.input, format)?;
    let f = args.fractions.iter().map(|s| parse_fraction(s)).collect::<Result<Vec<_>>>()?;
    let spec = SplitSpec::new(f[0], f[1], f[2], args.seed)?;
    let (train, dev, test) = split_corpus(&corpus, &spec)?;
    let ext = match format {
        CorpusFormat::Tsv => "tsv",
        CorpusFormat::Csv => "csv",
    };
    for (name, part) in [("train", &train), ("dev", &dev), ("test", &test)] {
        save_corpus(part, &args.out_dir.join(format!("{name}.{ext}")), format)?;
        println!("{name}: {}", part.len());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut corpus = load_corpus(&args.train, args.format.for_path(&args.train))?;
    if args.clean {
        corpus = clean_corpus_with_stats(&corpus, &CleaningConfig::default()).0;
    }
    let base = match args.profile {
        Profile::FineTune => TrainConfig::default(),
        Profile::Baseline => TrainConfig {
            learning_rate: BASELINE_LEARNING_RATE,
            ..TrainConfig::default()
        },
    };
    let mut train = TrainConfig {
        epochs: args.epochs.unwrap_or(base.epochs),
        learning_rate: args.learning_rate.unwrap_or(base.learning_rate),
        batch_size: args.batch_size.unwrap_or(base.batch_size),
        seed: args.seed,
        ..base
    };
    if let Some(wd) = args.weight_decay {
        train.optimizer.weight_decay = wd;
    }
    let defaults = FeatureConfig::default();
    let features = FeatureConfig {
        ngram_min: args.ngram_min.unwrap_or(defaults.ngram_min),
        ngram_max: args.ngram_max.unwrap_or(defaults.ngram_max),
        max_features: args.max_features.unwrap_or(defaults.max_features),
    };
    let model = BaselineModel::fit(&corpus, features, train)?;
    model.save(&args.model)?;
    println!(
        "trained on {} examples, {} features, {} classes",
        corpus.len(),
        model.vocabulary.len(),
        model.classifier.label_space().len()
    );
    for (epoch, loss) in model.loss_history.iter().enumerate() {
        println!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = BaselineModel::load(&args.model)?;
    let mut corpus = load_corpus(&args.input, args.format.for_path(&args.input))?;
    if args.clean {
        corpus = clean_corpus_with_stats(&corpus, &CleaningConfig::default()).0;
    }
    let id = match args.model_id {
        Some(id) => id,
        None => args.model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let set = model.predict_corpus(&corpus, &id)?;
    write_predictions(&set, &args.output)?;
    println!("{} predictions written to {}", set.len(), args.output.display());
    Ok(())
}

fn cmd_ensemble(args: EnsembleArgs) -> Result<()> {
    let first = read_predictions_unaligned(&args.predictions[0])?;
    let ids: Vec<String> = first.ids().map(str::to_owned).collect();
    let mut sets = vec![first];
    for path in &args.predictions[1..] {
        sets.push(read_predictions(path, &ids)?);
    }
    let priority = if args.priority.is_empty() {
        sets.iter().map(|s| s.model_id().to_owned()).collect()
    } else {
        args.priority
    };
    let policy = VotePolicy {
        strategy: args.strategy,
        tie_break: args.tie_break,
        model_priority: if args.tie_break == TieBreak::ModelPriority { priority } else { Vec::new() },
    };
    let combined = vote(&sets, &policy)?;
    write_predictions(&combined, &args.output)?;
    if let Some(path) = &args.submission {
        write_submission(&combined, path)?;
    }
    if args.agreement {
        print!("{}", agreement_report(&sets)?.to_text(2));
    }
    println!("{} ensemble predictions written to {}", combined.len(), args.output.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let gold = load_corpus(&args.gold, args.format.for_path(&args.gold))?;
    let set = read_predictions(&args.predictions, &gold.ids())?;
    let (_, report) = evaluate(&gold, &set)?;
    let ScoreArgs { average, digits, output } = args.score;
    match output {
        Output::Text => print!("{}", report.to_text(average, digits)),
        Output::Tsv => print!("{}", report.to_tsv(average, digits)),
        Output::Json => println!("{}", report.to_json(average, digits)),
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let gold = load_corpus(&args.gold, args.format.for_path(&args.gold))?;
    let ids = gold.ids();
    let mut reports = Vec::new();
    for path in &args.predictions {
        let set = read_predictions(path, &ids)?;
        let (_, report) = evaluate(&gold, &set)?;
        reports.push((set.model_id().to_owned(), report));
    }
    let ScoreArgs { average, digits, output } = args.score;
    let table = compare_models(&args.title, &reports, average)?;
    match output {
        Output::Text => print!("{}", table.to_text(digits, "Hard Voting")),
        Output::Tsv => print!("{}", table.to_tsv(digits)),
        Output::Json => println!("{}", table.to_json(digits)),
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.override_seed(seed);
    }
    config.validate()?;
    let out = args
        .out_dir
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::validation("no output directory: set output_dir, --out-dir or DIALECT_ID_OUT"))?;
    if args.dry_run {
        println!("config ok; output would go to {}", out.display());
        return Ok(());
    }
    let summary = pipeline::run(&config, &out)?;
    let (train, dev, test) = summary.split_sizes;
    println!("train {train}, dev {dev}, test {test}");
    println!(
        "cleaning: {} examples, {} tokens removed, {} emptied",
        summary.cleaning.examples, summary.cleaning.tokens_removed, summary.cleaning.emptied
    );
    for split in summary.tables.keys() {
        let path = out.join("reports").join(format!("results.{}.txt", split.name()));
        print!("\n{}", String::from_utf8_lossy(&fsutil::read_bytes(&path)?));
    }
    println!("\noutputs in {}", out.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        classes: args.classes,
        per_class: args.per_class,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let corpus = synthetic::generate(&config)?;
    save_corpus(&corpus, &args.output, CorpusFormat::from_path(&args.output))?;
    println!("{} examples, {} classes", corpus.len(), corpus.label_space().len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Clean(a) => cmd_clean(a),
        Command::Split(a) => cmd_split(a),
        Command::TrainBaseline(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Ensemble(a) => cmd_ensemble(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
