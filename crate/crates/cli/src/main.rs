//! `signalmatch`: batch entry points over the matching library.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use signalmatch::classifiers::TrainConfig;
use signalmatch::data::{
    generate_synthetic, load_library, load_pairs, save_library, save_pairs, split_by_project,
    SynthConfig,
};
use signalmatch::evaluate::{
    benchmark, curve_to_csv, learning_curve, run_eval, EvalConfig, DEFAULT_CURVE_FRACTIONS,
};
use signalmatch::preprocess::{clean, tokenize_raw};
use signalmatch::rerank::rerank;
use signalmatch::{AntonymTable, Dataset, KeywordSet, Method, Model, SignalLibrary};
use signalmatch_service::ServiceConfig;

#[derive(Debug, Parser)]
#[command(
    name = "signalmatch",
    version,
    about = "Suggest library signal names for customer signal names"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus: pairs.csv, library.txt, antonyms.json, keywords.txt.
    Generate(GenerateArgs),
    /// Print the tokens of one signal name, one per line.
    Tokenize { signal: String },
    /// Clean a pairs file against a library and train a model.
    Train(TrainArgs),
    /// Top-k suggestions for every line of a file, as CSV.
    Predict(PredictArgs),
    /// Project-wise evaluation. JSON report on stdout, table on stderr.
    Eval(EvalArgs),
    /// Accuracy for growing fractions of the training projects, as CSV.
    Curve {
        #[command(flatten)]
        eval: EvalArgs,
        /// Comma-separated fractions in (0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CURVE_FRACTIONS)]
        fractions: Vec<f64>,
    },
    /// Training time, prediction latency and model size, as JSON.
    Bench(EvalArgs),
    /// Run the HTTP suggestion service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().n_classes)]
    classes: usize,
    #[arg(long, default_value_t = SynthConfig::default().n_projects)]
    projects: usize,
    #[arg(long, default_value_t = SynthConfig::default().pairs_per_project)]
    pairs_per_project: usize,
    #[arg(long, default_value_t = SynthConfig::default().vocab_size)]
    vocab: usize,
    /// Fraction of pairs whose label is replaced by a random other class.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
}

impl GenerateArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            n_classes: self.classes,
            n_projects: self.projects,
            pairs_per_project: self.pairs_per_project,
            vocab_size: self.vocab,
            noise_rate: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// lookup, nb or tokvote.
    #[arg(long, default_value = "tokvote")]
    method: Method,
    /// Longest n-gram used by tokvote.
    #[arg(long, default_value_t = TrainConfig::default().max_n)]
    max_n: usize,
    /// Laplace smoothing of nb.
    #[arg(long, default_value_t = TrainConfig::default().alpha)]
    alpha: f64,
}

impl ModelArgs {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_n: self.max_n,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    library: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RuleArgs {
    /// JSON object mapping a trigger token to its forbidden words.
    #[arg(long)]
    antonyms: Option<PathBuf>,
    /// Reward keywords, one per line.
    #[arg(long)]
    keywords: Option<PathBuf>,
}

impl RuleArgs {
    fn load(&self) -> Result<(AntonymTable, KeywordSet)> {
        let antonyms = match &self.antonyms {
            Some(p) => AntonymTable::load(p)?,
            None => AntonymTable::default(),
        };
        let keywords = match &self.keywords {
            Some(p) => KeywordSet::load(p)?,
            None => KeywordSet::default(),
        };
        Ok((antonyms, keywords))
    }
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Customer signal names, one per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[command(flatten)]
    rules: RuleArgs,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Seed of the project-wise split.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Score raw classifier output without the rerank rules.
    #[arg(long)]
    no_rerank: bool,
    /// Pairs CSV. Without it a synthetic corpus is generated.
    #[arg(long, requires = "library")]
    pairs: Option<PathBuf>,
    #[arg(long, requires = "pairs")]
    library: Option<PathBuf>,
    #[command(flatten)]
    rules: RuleArgs,
    /// Label noise of the synthetic corpus.
    #[arg(long, default_value_t = 0.0, conflicts_with = "pairs")]
    noise: f64,
    /// Seed of the synthetic corpus.
    #[arg(long, default_value_t = SynthConfig::default().seed, conflicts_with = "pairs")]
    corpus_seed: u64,
}

struct EvalInputs {
    dataset: Dataset,
    library: SignalLibrary,
    antonyms: AntonymTable,
    keywords: KeywordSet,
}

impl EvalArgs {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            k: self.k,
            test_fraction: self.test_fraction,
            seed: self.seed,
            rerank: !self.no_rerank,
            train: self.model.train_config(),
        }
    }

    fn inputs(&self) -> Result<EvalInputs> {
        if let (Some(pairs), Some(library)) = (&self.pairs, &self.library) {
            let (antonyms, keywords) = self.rules.load()?;
            return Ok(EvalInputs {
                dataset: load_pairs(pairs)?,
                library: load_library(library)?,
                antonyms,
                keywords,
            });
        }
        let corpus = generate_synthetic(&SynthConfig {
            noise_rate: self.noise,
            seed: self.corpus_seed,
            ..SynthConfig::default()
        })?;
        // explicit rule files override the generated ones
        let antonyms = match &self.rules.antonyms {
            Some(p) => AntonymTable::load(p)?,
            None => corpus.antonyms,
        };
        let keywords = match &self.rules.keywords {
            Some(p) => KeywordSet::load(p)?,
            None => corpus.keywords,
        };
        Ok(EvalInputs {
            dataset: corpus.dataset,
            library: corpus.library,
            antonyms,
            keywords,
        })
    }
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "SIGNALMATCH_PAIRS")]
    pairs: PathBuf,
    #[arg(long, env = "SIGNALMATCH_LIBRARY")]
    library: PathBuf,
    #[arg(long, env = "SIGNALMATCH_ANTONYMS")]
    antonyms: Option<PathBuf>,
    #[arg(long, env = "SIGNALMATCH_KEYWORDS")]
    keywords: Option<PathBuf>,
    /// Append-only confirmation log (newline-delimited JSON).
    #[arg(
        long,
        env = "SIGNALMATCH_CONFIRMATIONS",
        default_value = "confirmations.ndjson"
    )]
    confirmations: PathBuf,
    #[arg(long, env = "SIGNALMATCH_METHOD", default_value = "tokvote")]
    method: Method,
    /// Suggestions per call when the request gives no `k`.
    #[arg(long, env = "SIGNALMATCH_K", default_value_t = 10)]
    k: usize,
    #[arg(long, env = "SIGNALMATCH_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let corpus = generate_synthetic(&args.config())?;
    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_pairs(&corpus.dataset, dir.join("pairs.csv"))?;
    save_library(&corpus.library, dir.join("library.txt"))?;
    write_file(&dir.join("antonyms.json"), &corpus.antonyms.to_json())?;
    let keywords: String = corpus.keywords.iter().map(|k| format!("{k}\n")).collect();
    write_file(&dir.join("keywords.txt"), &keywords)?;
    eprintln!(
        "wrote {} pairs over {} projects and {} library signals to {}",
        corpus.dataset.len(),
        corpus.dataset.projects().len(),
        corpus.library.len(),
        dir.display()
    );
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn train(args: &TrainArgs) -> Result<()> {
    let (train, stats) = clean(&load_pairs(&args.pairs)?, &load_library(&args.library)?);
    if train.is_empty() {
        bail!("no pairs left after cleaning");
    }
    let model = Model::train(args.model.method, &train, &args.model.train_config())?;
    model.save(&args.out)?;
    eprintln!(
        "trained {} on {} pairs ({} removed by cleaning), {} labels -> {}",
        args.model.method,
        train.len(),
        stats.removed(),
        model.n_labels(),
        args.out.display()
    );
    Ok(())
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let (antonyms, keywords) = args.rules.load()?;
    let input =
        fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    csv.write_record(["customer_signal", "rank", "label", "score"])?;
    for line in BufReader::new(input).lines() {
        let line = line?;
        let signal = line.trim();
        if signal.is_empty() {
            continue;
        }
        let preds = rerank(
            &tokenize_raw(signal),
            model.predict(signal, args.k)?,
            &antonyms,
            &keywords,
        );
        for (rank, entry) in preds.entries.iter().enumerate() {
            csv.write_record([
                signal,
                &(rank + 1).to_string(),
                &entry.label,
                &entry.score.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let data = args.inputs()?;
    let report = run_eval(
        args.model.method,
        &data.dataset,
        &data.library,
        &data.antonyms,
        &data.keywords,
        &args.config(),
    )?;
    eprint!("{}", report.render_table());
    emit(&format!("{}\n", report.to_json()))
}

fn curve(args: &EvalArgs, fractions: &[f64]) -> Result<()> {
    let data = args.inputs()?;
    let points = learning_curve(
        args.model.method,
        &data.dataset,
        &data.library,
        &data.antonyms,
        &data.keywords,
        fractions,
        &args.config(),
    )?;
    emit(&curve_to_csv(&points))
}

fn bench(args: &EvalArgs) -> Result<()> {
    let data = args.inputs()?;
    let (train, test) = split_by_project(&data.dataset, args.test_fraction, args.seed)?;
    let (train, _) = clean(&train, &data.library);
    let (test, _) = clean(&test, &data.library);
    let queries: Vec<String> = test
        .pairs()
        .iter()
        .map(|p| p.customer_signal.clone())
        .collect();
    let report = benchmark(
        args.model.method,
        &train,
        &queries,
        args.k,
        &args.model.train_config(),
    )?;
    emit(&format!("{}\n", serde_json::to_string_pretty(&report)?))
}

fn serve(args: &ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::new(&args.pairs, &args.library, &args.confirmations);
    config.antonyms = args.antonyms.clone();
    config.keywords = args.keywords.clone();
    config.method = args.method;
    config.default_k = args.k;
    signalmatch_service::run(config, args.addr, |svc| {
        if let Some(snapshot) = svc.snapshot() {
            eprintln!(
                "serving {} model {} ({} labels) on http://{}",
                snapshot.info.method,
                snapshot.version(),
                snapshot.info.n_labels,
                args.addr
            );
        }
    })?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(&args),
        Command::Tokenize { signal } => {
            let tokens: String = tokenize_raw(&signal)
                .iter()
                .map(|t| format!("{t}\n"))
                .collect();
            emit(&tokens)
        }
        Command::Train(args) => train(&args),
        Command::Predict(args) => predict(&args),
        Command::Eval(args) => eval(&args),
        Command::Curve { eval, fractions } => curve(&eval, &fractions),
        Command::Bench(args) => bench(&args),
        Command::Serve(args) => serve(&args),
    }
}

/// Writes to stdout. A reader that hangs up early (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// The error and its causes on one line, skipping causes a message already
/// ends with.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let cause = cause.to_string();
        if !msg.ends_with(&cause) {
            msg = format!("{msg}: {cause}");
        }
    }
    msg
}

fn hung_up(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>().is_some_and(
                |csv| matches!(csv.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe),
            )
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if hung_up(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
