mod data;

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bibvec::corpus::{self, PhraseConfig, SplitOrder};
use bibvec::eval::{self, LogisticConfig, McqQuestion, McqStrategy, SyntheticSpec};
use bibvec::persist::{load_model, save_model};
use bibvec::search::{resolve_query, top_k};
use bibvec::{
    ElementRef, EmbeddingModel, Error, SimilarityMeasure, TrainConfig, UnknownPolicy, Vocabulary,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use data::DataDir;

#[derive(Parser)]
#[command(
    name = "bibvec",
    version,
    about = "Multi-category embeddings for bibliographic records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build vocabularies from a JSON-lines corpus and write encoded train/test sets.
    Ingest(IngestArgs),
    /// Train a model on an ingested data directory.
    Train(TrainArgs),
    /// Print the elements most related to one element, as token<TAB>score lines.
    Query(QueryArgs),
    /// Score the multiple-choice author prediction task and print a JSON report.
    Eval(EvalArgs),
    /// Serve the JSON API (and optionally a static UI) over HTTP.
    Serve(ServeArgs),
    /// Write a topic-clustered synthetic corpus in the input format.
    Synth(SynthArgs),
}

#[derive(clap::Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// JSON array of category specs; the built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    test_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hold out the latest papers by year instead of a random sample.
    #[arg(long)]
    chronological: bool,
    /// Skip phrase mining.
    #[arg(long)]
    no_phrases: bool,
    #[arg(long, default_value_t = 100.0)]
    phrase_threshold: f64,
    #[arg(long, default_value_t = 5.0)]
    phrase_discount: f64,
    #[arg(long, default_value_t = 2)]
    phrase_passes: usize,
    /// Map out-of-vocabulary tokens to a per-category <unk> entry instead of dropping them.
    #[arg(long)]
    unk: bool,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    min_lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// More than one worker trains in parallel without bitwise reproducibility.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct QueryArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    category: String,
    #[arg(long)]
    token: String,
    #[arg(long)]
    target_category: String,
    #[arg(long, default_value = "linear")]
    measure: SimilarityMeasure,
    #[arg(short, default_value_t = 20)]
    k: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Logistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    SummedLogits,
    SummedLogProbs,
}

impl From<Strategy> for McqStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::SummedLogits => McqStrategy::SummedLogits,
            Strategy::SummedLogProbs => McqStrategy::SummedLogProbs,
        }
    }
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = eval::DEFAULT_CHOICES)]
    choices: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Strategy::SummedLogits)]
    strategy: Strategy,
    /// Also train and score a baseline on the same questions.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, env = "BIBVEC_MODEL")]
    model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Directory of UI assets served for paths outside /api.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    topics: usize,
    #[arg(long, default_value_t = 5)]
    authors_per_topic: usize,
    #[arg(long, default_value_t = 50)]
    words_per_topic: usize,
    #[arg(long, default_value_t = 50)]
    papers_per_topic: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Train(args) => train(args),
        Command::Query(args) => query(args),
        Command::Eval(args) => evaluate(args),
        Command::Serve(args) => serve(args),
        Command::Synth(args) => synth(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

#[derive(Serialize)]
struct IngestManifest {
    corpus: PathBuf,
    papers: usize,
    train: usize,
    test: usize,
    seed: u64,
    split: SplitOrder,
    phrases: Option<PhraseConfig>,
    unknown_policy: UnknownPolicy,
    categories: Vec<CategorySummary>,
}

#[derive(Serialize)]
struct CategorySummary {
    name: String,
    kind: &'static str,
    min_freq: u64,
    size: usize,
}

fn ingest(args: IngestArgs) -> Result<()> {
    let specs = match &args.config {
        Some(path) => corpus::load_categories(path)?,
        None => corpus::default_categories(),
    };
    let mut papers = corpus::load_corpus(&args.corpus)?;
    log::info!(
        "read {} papers from {}",
        papers.len(),
        args.corpus.display()
    );
    let phrases = (!args.no_phrases).then_some(PhraseConfig {
        threshold: args.phrase_threshold,
        discount: args.phrase_discount,
        passes: args.phrase_passes,
    });
    if let Some(config) = &phrases {
        corpus::apply_phrases(&mut papers, config)?;
    }
    let n_papers = papers.len();
    if args.test_size > n_papers {
        bail!(
            "--test-size {} exceeds the corpus size {n_papers}",
            args.test_size
        );
    }
    let split = if args.chronological {
        SplitOrder::Chronological
    } else {
        SplitOrder::Random
    };
    let (train, test) = corpus::split_dataset(papers, args.test_size, args.seed, split)?;
    let policy = if args.unk {
        UnknownPolicy::MapToUnk
    } else {
        UnknownPolicy::Drop
    };
    let vocab = corpus::build_vocabulary_with(&train, &specs, policy)?;
    let encode = |ps: &[bibvec::PaperRecord]| -> Vec<_> {
        ps.iter().map(|p| corpus::encode_paper(&vocab, p)).collect()
    };

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let dir = DataDir(args.out.clone());
    data::write_json(&dir.path(data::VOCAB), &vocab)?;
    data::write_jsonl(&dir.path(data::TRAIN), &encode(&train))?;
    data::write_jsonl(&dir.path(data::TEST), &encode(&test))?;
    let categories = vocab
        .categories()
        .iter()
        .map(|c| CategorySummary {
            name: c.name().to_string(),
            kind: c.kind().as_str(),
            min_freq: c.spec().min_freq,
            size: c.len(),
        })
        .collect::<Vec<_>>();
    for c in &categories {
        log::info!(
            "{:<10} {:>8} elements (min frequency {})",
            c.name,
            c.size,
            c.min_freq
        );
    }
    data::write_json(
        &dir.path(data::MANIFEST),
        &IngestManifest {
            corpus: args.corpus,
            papers: n_papers,
            train: train.len(),
            test: test.len(),
            seed: args.seed,
            split,
            phrases,
            unknown_policy: policy,
            categories,
        },
    )?;
    log::info!(
        "wrote {} train and {} test papers to {}",
        train.len(),
        test.len(),
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let dir = DataDir(args.data);
    let vocab = dir.vocab()?;
    let papers = dir.papers(data::TRAIN, &vocab)?;
    let config = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        min_learning_rate: args.min_lr,
        negatives: args.negatives,
        seed: args.seed,
        workers: args.workers,
    };
    config.validate()?;
    let mut model = EmbeddingModel::init(&vocab, args.dim, args.seed)?;
    log::info!(
        "training {} parameters on {} papers ({} epochs, {} worker(s))",
        model.parameter_count(),
        papers.len(),
        config.epochs,
        config.workers
    );
    let start = Instant::now();
    let report = bibvec::model::train(&mut model, &papers, &config)?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        log::info!("epoch {:>3}: mean NCE loss {loss:.4}", i + 1);
    }
    log::info!(
        "{} pairs per epoch, {:.1}s",
        report.pairs_per_epoch,
        start.elapsed().as_secs_f64()
    );
    save_model(&model, &vocab, &args.out)?;
    log::info!("saved {}", args.out.display());
    Ok(())
}

fn query(args: QueryArgs) -> Result<()> {
    let (model, vocab) = load_model(&args.model)?;
    let q = match resolve_query(&vocab, &args.category, &args.token) {
        Err(Error::NotFound { suggestions, .. }) if !suggestions.is_empty() => {
            bail!(
                "{:?} is not in the {} vocabulary; did you mean {}?",
                args.token,
                args.category,
                suggestions
                    .iter()
                    .map(|s| format!("{s:?}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        }
        other => other?,
    };
    let target = vocab.category_index(&args.target_category)?;
    let ranked = top_k(
        &model,
        &vocab,
        q,
        target,
        args.measure,
        args.k,
        &HashSet::new(),
    )?;
    let mut out = String::new();
    for (e, score) in &ranked.entries {
        out.push_str(&format!(
            "{}\t{score:.6}\n",
            vocab.category(e.category).token(e.index)
        ));
    }
    print!("{out}");
    Ok(())
}

#[derive(Serialize)]
struct MethodReport<S: Serialize> {
    settings: S,
    #[serde(flatten)]
    report: eval::EvalReport,
}

#[derive(Serialize)]
struct ModelSettings {
    strategy: McqStrategy,
    choices: usize,
    seed: u64,
    /// Questions with no usable element left; answered by the tie rule.
    unanswerable: usize,
}

/// Answers every question; papers with nothing left to score from get the
/// tie-rule answer.
fn answer_all(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    questions: &[McqQuestion],
    strategy: McqStrategy,
) -> Result<(Vec<ElementRef>, usize)> {
    let mut unanswerable = 0;
    let mut answers = Vec::with_capacity(questions.len());
    for q in questions {
        match eval::answer_mcq(model, vocab, q, strategy) {
            Ok(a) => answers.push(a),
            Err(Error::Unanswerable(_)) => {
                unanswerable += 1;
                let zeros = vec![0.0; q.candidates.len()];
                answers.push(eval::argmax_candidate(vocab, &q.candidates, &zeros));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((answers, unanswerable))
}

fn evaluate(args: EvalArgs) -> Result<()> {
    let (model, vocab) = load_model(&args.model)?;
    let dir = DataDir(args.data);
    if dir.vocab()? != vocab {
        bail!("the model was not trained on this data directory (vocabularies differ)");
    }
    let test = dir.papers(data::TEST, &vocab)?;
    let questions = eval::make_mcq(&test, &vocab, args.choices, args.seed)?;
    let strategy = McqStrategy::from(args.strategy);
    let (answers, unanswerable) = answer_all(&model, &vocab, &questions, strategy)?;
    if unanswerable > 0 {
        log::warn!("{unanswerable} questions had no remaining elements to score from");
    }
    let report = eval::EvalReport::new("embedding", &vocab, &questions, &answers)?;
    log::info!(
        "embedding: {} / {} = {:.4}",
        report.correct,
        report.questions,
        report.accuracy
    );
    let model_report = MethodReport {
        settings: ModelSettings {
            strategy,
            choices: args.choices,
            seed: args.seed,
            unanswerable,
        },
        report,
    };
    let json = match args.baseline {
        None => serde_json::to_string_pretty(&model_report)?,
        Some(Baseline::Logistic) => {
            let train = dir.papers(data::TRAIN, &vocab)?;
            let config = LogisticConfig {
                seed: args.seed,
                ..LogisticConfig::default()
            };
            let answers = eval::logistic_baseline(&vocab, &train, &questions, &config)?;
            let report = eval::EvalReport::new("logistic", &vocab, &questions, &answers)?;
            log::info!(
                "logistic: {} / {} = {:.4}",
                report.correct,
                report.questions,
                report.accuracy
            );
            let baseline = MethodReport {
                settings: config,
                report,
            };
            serde_json::to_string_pretty(&serde_json::json!([model_report, baseline]))?
        }
    };
    println!("{json}");
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let (model, vocab) = load_model(&args.model)?;
    log::info!("loaded {} (d = {})", args.model.display(), model.dim());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(bibvec_service::serve(
            model,
            vocab,
            args.bind,
            args.static_dir,
        ))
        .with_context(|| format!("serving on {}", args.bind))
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_topics: args.topics,
        authors_per_topic: args.authors_per_topic,
        words_per_topic: args.words_per_topic,
        papers_per_topic: args.papers_per_topic,
        noise_rate: args.noise,
    };
    let records = eval::synth_raw_records(&spec, args.seed)?;
    data::write_jsonl(&args.out, &records)?;
    log::info!("wrote {} papers to {}", records.len(), args.out.display());
    Ok(())
}
