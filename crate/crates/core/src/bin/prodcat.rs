//! `prodcat`: batch command-line interface.
//!
//! Settings can come from a TOML key-value file (`--config`); flags given
//! on the command line override the file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use prodcat::corpus::{OnMalformed, Taxonomy};
use prodcat::ensemble::{
    agreement, check_pair, order_by_agreement, read_predictions, read_weights, select_top_fraction, top2_boost,
    weighted_vote, write_predictions, EnsembleError, PredictionSet, TieBreak, VoteConfig,
};
use prodcat::eval::{evaluate, level_rollup};
use prodcat::features::{FeatureBudget, MarqueMode, NgramOrders, VectorizerConfig, Weighting};
use prodcat::linear::TrainConfig;
use prodcat::pipeline::{
    train_file, PipelineConfig, PipelineError, SamplingPlan, TrainMode, TrainedPipeline, VocabScope,
};
use prodcat::synth::{generate, NoiseKind, Shape, SynthSpec};
use prodcat::textprep::{clean_text, tokenize};

#[derive(Parser)]
#[command(
    name = "prodcat",
    version,
    about = "Hierarchical product categorization with linear SVMs"
)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log warnings and errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and tokenize text, one output line per input line.
    Prepare(PrepareArgs),
    /// Generate a synthetic labeled corpus.
    Synth(SynthArgs),
    /// Train a flat or hierarchical model.
    Train(TrainArgs),
    /// Predict leaf categories for a test file.
    Predict(PredictArgs),
    /// Combine prediction files by (weighted) voting.
    Ensemble(EnsembleArgs),
    /// Score a prediction file against the truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Input text file; standard input when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print the cleaned text instead of tokens.
    #[arg(long)]
    clean_only: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Nodes per level, e.g. 2/4/8.
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    docs_per_class: Option<usize>,
    /// Signature words per leaf and pool words per internal node.
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Fraction of text chunks replaced by noise.
    #[arg(long)]
    noise: Option<f64>,
    /// shared or sibling.
    #[arg(long)]
    noise_kind: Option<String>,
    /// Chunks per description.
    #[arg(long)]
    doc_length: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Class-size decay exponent; 0 gives equal classes.
    #[arg(long)]
    imbalance: Option<f64>,
    /// Probability that a text repeats one noise chunk several times.
    #[arg(long)]
    burst: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training file.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Hierarchy file with level1;level2;level3 rows.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Output model directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// flat, topdown or topdown-pruned.
    #[arg(long)]
    mode: Option<String>,
    /// global, or per-node for one vocabulary per top-down node.
    #[arg(long)]
    vocab_scope: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
    /// N-gram orders, e.g. 1,2.
    #[arg(long)]
    ngrams: Option<String>,
    /// Pooled n-gram budget.
    #[arg(long, conflicts_with = "max_features_per_order")]
    max_features: Option<usize>,
    /// Per-order budgets, e.g. 1=200000,2=400000.
    #[arg(long)]
    max_features_per_order: Option<String>,
    /// binary, tf or tfidf.
    #[arg(long)]
    weighting: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// none, concat or flags.
    #[arg(long)]
    marque: Option<String>,
    #[arg(long)]
    per_class_cap: Option<usize>,
    #[arg(long)]
    target_fraction: Option<f64>,
    /// Train on the instances of this many random classes only.
    #[arg(long)]
    tuning_classes: Option<usize>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// abort or skip.
    #[arg(long)]
    on_malformed: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// File to categorize; a label column is ignored.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Prediction file (id;label).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Prediction files to combine.
    #[arg(required = true)]
    predictions: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// model_id<TAB>weight lines; model ids are file stems.
    #[arg(long)]
    weights_file: Option<PathBuf>,
    /// Prediction set to rank the models against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Keep this fraction of the (ranked) models.
    #[arg(long)]
    top_fraction: Option<f64>,
    /// Weight for the two best-ranked models; the rest weigh 1.
    #[arg(long)]
    boost: Option<f64>,
    /// heaviest or lexicographic.
    #[arg(long)]
    tie_break: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// id;label file with the true labels.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Adds per-level accuracy.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Include the per-class block.
    #[arg(long)]
    per_class: bool,
    /// table or kv.
    #[arg(long)]
    format: Option<String>,
    /// Report file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    delimiter: Option<String>,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    threads: Option<usize>,
    delimiter: Option<String>,
    seed: Option<u64>,
    // paths
    train: Option<PathBuf>,
    hierarchy: Option<PathBuf>,
    model: Option<PathBuf>,
    test: Option<PathBuf>,
    output: Option<PathBuf>,
    truth: Option<PathBuf>,
    // features
    ngrams: Option<String>,
    max_features: Option<usize>,
    max_features_per_order: Option<String>,
    weighting: Option<String>,
    alpha: Option<f64>,
    marque: Option<String>,
    // sampling
    per_class_cap: Option<usize>,
    target_fraction: Option<f64>,
    tuning_classes: Option<usize>,
    // training
    mode: Option<String>,
    vocab_scope: Option<String>,
    #[serde(rename = "C")]
    c: Option<f64>,
    bias: Option<f64>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    on_malformed: Option<String>,
    // ensemble
    weights_file: Option<PathBuf>,
    reference: Option<PathBuf>,
    top_fraction: Option<f64>,
    boost: Option<f64>,
    tie_break: Option<String>,
    // synth
    shape: Option<String>,
    docs_per_class: Option<usize>,
    vocab_size: Option<usize>,
    noise: Option<f64>,
    noise_kind: Option<String>,
    doc_length: Option<usize>,
    test_fraction: Option<f64>,
    imbalance: Option<f64>,
    burst: Option<f64>,
}

/// Bad flags or missing inputs; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing --{flag} (or `{flag}` in the config file)")))
}

fn parse_delimiter(value: Option<String>) -> Result<u8> {
    match value.as_deref() {
        None => Ok(b';'),
        Some("\\t") | Some("tab") => Ok(b'\t'),
        Some(s) if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        Some(s) => Err(usage(format!("delimiter must be one ASCII character, got {s:?}"))),
    }
}

fn parse<T: std::str::FromStr>(value: Option<String>, what: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .map(|s| s.parse::<T>().map_err(|e| usage(format!("--{what}: {e}"))))
        .transpose()
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(e.downcast_ref::<PipelineError>(), Some(PipelineError::Usage(_)));
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    let threads = cli.threads.or(file.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("starting the thread pool")?;
    log::info!("threads = {}", pool.current_num_threads());
    pool.install(|| match cli.command {
        Command::Prepare(a) => cmd_prepare(a),
        Command::Synth(a) => cmd_synth(a, file),
        Command::Train(a) => cmd_train(a, file),
        Command::Predict(a) => cmd_predict(a, file),
        Command::Ensemble(a) => cmd_ensemble(a, file),
        Command::Evaluate(a) => cmd_evaluate(a, file),
    })
}

fn cmd_prepare(a: PrepareArgs) -> Result<()> {
    let input: Box<dyn BufRead> = match &a.input {
        Some(p) => Box::new(open(p)?),
        None => Box::new(BufReader::new(io::stdin())),
    };
    let mut out: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    };
    // lines may carry arbitrary bytes; decode lossily
    let mut bytes = Vec::new();
    let mut input = input;
    input.read_to_end(&mut bytes)?;
    let text = String::from_utf8_lossy(&bytes);
    for line in text.lines() {
        let processed = if a.clean_only {
            clean_text(line)
        } else {
            tokenize(line).join()
        };
        writeln!(out, "{processed}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_synth(a: SynthArgs, f: FileConfig) -> Result<()> {
    let out = required(a.out.or(f.output), "out")?;
    let defaults = SynthSpec::default();
    let shape = match a.shape.or(f.shape) {
        Some(s) => s.parse::<Shape>().map_err(|e| usage(e.to_string()))?,
        None => defaults.shape.clone(),
    };
    let spec = SynthSpec {
        shape,
        docs_per_class: a.docs_per_class.or(f.docs_per_class).unwrap_or(defaults.docs_per_class),
        vocab_size: a.vocab_size.or(f.vocab_size).unwrap_or(defaults.vocab_size),
        noise: a.noise.or(f.noise).unwrap_or(defaults.noise),
        noise_kind: parse::<NoiseKind>(a.noise_kind.or(f.noise_kind), "noise-kind")?.unwrap_or_default(),
        doc_length: a.doc_length.or(f.doc_length).unwrap_or(defaults.doc_length),
        test_fraction: a.test_fraction.or(f.test_fraction).unwrap_or(defaults.test_fraction),
        imbalance: a.imbalance.or(f.imbalance).unwrap_or(defaults.imbalance),
        burst: a.burst.or(f.burst).unwrap_or(defaults.burst),
        seed: a.seed.or(f.seed).unwrap_or(defaults.seed),
    };
    let delimiter = parse_delimiter(a.delimiter.or(f.delimiter))?;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    log::info!(
        "synth: out = {}, shape = {}, docs_per_class = {}, vocab_size = {}, noise = {}, noise_kind = {}, \
         doc_length = {}, test_fraction = {}, imbalance = {}, burst = {}, seed = {}, delimiter = {:?}",
        out.display(),
        spec.shape,
        spec.docs_per_class,
        spec.vocab_size,
        spec.noise,
        spec.noise_kind,
        spec.doc_length,
        spec.test_fraction,
        spec.imbalance,
        spec.burst,
        spec.seed,
        delimiter as char
    );
    let corpus = generate(&spec)?;
    corpus.write_to_dir(&out, delimiter)?;
    log::info!(
        "wrote {} training and {} test records over {} leaves",
        corpus.train.len(),
        corpus.test.len(),
        corpus.taxonomy.leaf_count()
    );
    Ok(())
}

fn resolve_budget(a: &TrainArgs, f: &FileConfig) -> Result<Option<FeatureBudget>> {
    let per_order = |s: &str| -> Result<FeatureBudget> {
        format!("per-order:{s}")
            .parse::<FeatureBudget>()
            .map_err(|e| usage(format!("--max-features-per-order: {e}")))
    };
    Ok(match (a.max_features, &a.max_features_per_order) {
        (Some(k), _) => Some(FeatureBudget::Pooled(k)),
        (None, Some(s)) => Some(per_order(s)?),
        (None, None) => match (f.max_features, &f.max_features_per_order) {
            (Some(_), Some(_)) => return Err(usage("config sets both max-features and max-features-per-order")),
            (Some(k), None) => Some(FeatureBudget::Pooled(k)),
            (None, Some(s)) => Some(per_order(s)?),
            (None, None) => None,
        },
    })
}

fn cmd_train(a: TrainArgs, f: FileConfig) -> Result<()> {
    let budget = resolve_budget(&a, &f)?;
    let train = required(a.train.or(f.train), "train")?;
    let model_dir = required(a.model.or(f.model), "model")?;
    let hierarchy = a.hierarchy.or(f.hierarchy);

    let vd = VectorizerConfig::default();
    let td = TrainConfig::default();
    let on_malformed = match a.on_malformed.or(f.on_malformed).as_deref() {
        None | Some("abort") => OnMalformed::Abort,
        Some("skip") => OnMalformed::Skip,
        Some(s) => return Err(usage(format!("--on-malformed must be abort or skip, got {s:?}"))),
    };
    let config = PipelineConfig {
        vectorizer: VectorizerConfig {
            ngram_orders: parse::<NgramOrders>(a.ngrams.or(f.ngrams), "ngrams")?.unwrap_or(vd.ngram_orders),
            budget: budget.unwrap_or(vd.budget),
            weighting: parse::<Weighting>(a.weighting.or(f.weighting), "weighting")?.unwrap_or(vd.weighting),
            alpha: a.alpha.or(f.alpha).unwrap_or(vd.alpha),
            marque_mode: parse::<MarqueMode>(a.marque.or(f.marque), "marque")?.unwrap_or(vd.marque_mode),
        },
        sampling: SamplingPlan {
            tuning_classes: a.tuning_classes.or(f.tuning_classes),
            per_class_cap: a.per_class_cap.or(f.per_class_cap),
            target_fraction: a.target_fraction.or(f.target_fraction),
        },
        train: TrainConfig {
            c: a.c.or(f.c).unwrap_or(td.c),
            bias: a.bias.or(f.bias).unwrap_or(td.bias),
            tolerance: a.tolerance.or(f.tolerance).unwrap_or(td.tolerance),
            max_iterations: a.max_iterations.or(f.max_iterations).unwrap_or(td.max_iterations),
            ..td
        },
        mode: parse::<TrainMode>(a.mode.or(f.mode), "mode")?.unwrap_or_default(),
        vocab_scope: parse::<VocabScope>(a.vocab_scope.or(f.vocab_scope), "vocab-scope")?.unwrap_or_default(),
        delimiter: parse_delimiter(a.delimiter.or(f.delimiter))?,
        on_malformed,
        seed: a.seed.or(f.seed).unwrap_or(0),
    };
    log::info!(
        "train: train = {}, hierarchy = {}, model = {}\n{}",
        train.display(),
        hierarchy
            .as_ref()
            .map_or("none".to_string(), |p| p.display().to_string()),
        model_dir.display(),
        config.describe()
    );
    config.validate().map_err(|e| usage(e.to_string()))?;

    let (pipeline, summary) = train_file(&train, hierarchy.as_deref(), &config)?;
    pipeline.save(&model_dir)?;
    for line in summary.to_string().lines() {
        log::info!("{line}");
    }
    Ok(())
}

fn model_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_predict(a: PredictArgs, f: FileConfig) -> Result<()> {
    let model_dir = required(a.model.or(f.model), "model")?;
    let test = required(a.test.or(f.test), "test")?;
    let output = required(a.output.or(f.output), "output")?;
    let delimiter = parse_delimiter(a.delimiter.or(f.delimiter))?;
    log::info!(
        "predict: model = {}, test = {}, output = {}, delimiter = {:?}",
        model_dir.display(),
        test.display(),
        output.display(),
        delimiter as char
    );
    let pipeline = TrainedPipeline::load(&model_dir)?;
    let set = pipeline.predict_file(&test, delimiter, &model_id_of(&model_dir))?;
    let mut w = create(&output)?;
    write_predictions(&mut w, &set, delimiter)?;
    w.flush()?;
    log::info!("wrote {} predictions", set.len());
    Ok(())
}

fn read_set(path: &Path, delimiter: u8, model_id: &str) -> Result<PredictionSet> {
    read_predictions(open(path)?, delimiter, model_id).with_context(|| format!("reading {}", path.display()))
}

fn cmd_ensemble(a: EnsembleArgs, f: FileConfig) -> Result<()> {
    let output = required(a.output.or(f.output), "output")?;
    let delimiter = parse_delimiter(a.delimiter.or(f.delimiter))?;
    let weights_file = a.weights_file.or(f.weights_file);
    let reference = a.reference.or(f.reference);
    let top_fraction = a.top_fraction.or(f.top_fraction);
    let boost = a.boost.or(f.boost);
    let tie_break = match a.tie_break.or(f.tie_break).as_deref() {
        None | Some("heaviest") => TieBreak::HeaviestVoter,
        Some("lexicographic") => TieBreak::Lexicographic,
        Some(s) => {
            return Err(usage(format!(
                "--tie-break must be heaviest or lexicographic, got {s:?}"
            )))
        }
    };
    if weights_file.is_some() && boost.is_some() {
        return Err(usage("--weights-file and --boost are mutually exclusive"));
    }
    if boost.is_some() && reference.is_none() {
        return Err(usage("--boost needs --reference to rank the models"));
    }
    log::info!(
        "ensemble: inputs = {}, output = {}, weights_file = {}, reference = {}, top_fraction = {}, boost = {}, tie_break = {:?}",
        a.predictions.len(),
        output.display(),
        weights_file.as_ref().map_or("none".into(), |p| p.display().to_string()),
        reference.as_ref().map_or("none".into(), |p| p.display().to_string()),
        top_fraction.map_or("none".into(), |x| x.to_string()),
        boost.map_or("none".into(), |x| x.to_string()),
        tie_break
    );

    // file stems name the models unless two files share one
    let stems: Vec<String> = a.predictions.iter().map(|p| model_id_of(p)).collect();
    let unique = stems.iter().collect::<std::collections::BTreeSet<_>>().len() == stems.len();
    let mut sets = Vec::with_capacity(a.predictions.len());
    for (path, stem) in a.predictions.iter().zip(&stems) {
        let id = if unique {
            stem.clone()
        } else {
            path.display().to_string()
        };
        sets.push(read_set(path, delimiter, &id)?);
    }
    let offenders: Vec<String> = sets[1..]
        .iter()
        .zip(&a.predictions[1..])
        .filter(|(s, _)| check_pair(&sets[0], s).is_err())
        .map(|(_, p)| p.display().to_string())
        .collect();
    if !offenders.is_empty() {
        bail!(
            "prediction files do not match {} ({} instances): {}",
            a.predictions[0].display(),
            sets[0].len(),
            offenders.join(", ")
        );
    }

    let mut ordered: Vec<String> = sets.iter().map(|s| s.model_id.clone()).collect();
    if let Some(path) = &reference {
        let reference = read_set(path, delimiter, "reference")?;
        ordered = order_by_agreement(&sets, &reference)?;
        for id in &ordered {
            let s = sets.iter().find(|s| &s.model_id == id).expect("known id");
            log::info!("agreement {id} = {:.6}", agreement(s, &reference)?);
        }
    }
    if let Some(fraction) = top_fraction {
        ordered = select_top_fraction(&ordered, fraction).map_err(|e| usage(e.to_string()))?;
        log::info!("voting among {}", ordered.join(", "));
    }

    let weights: BTreeMap<String, f64> = match (&weights_file, boost) {
        (Some(path), _) => {
            let w = read_weights(open(path)?).with_context(|| format!("reading {}", path.display()))?;
            let all: Vec<&String> = sets.iter().map(|s| &s.model_id).collect();
            if let Some(unknown) = w.keys().find(|k| !all.contains(k)) {
                bail!("{}: no prediction file for model {unknown:?}", path.display());
            }
            w
        }
        (None, Some(factor)) => top2_boost(&ordered, factor)?,
        (None, None) => BTreeMap::new(),
    };
    let selected: Vec<PredictionSet> = ordered
        .iter()
        .map(|id| sets.iter().find(|s| &s.model_id == id).expect("known id").clone())
        .collect();
    let config = VoteConfig { weights, tie_break };
    let combined = weighted_vote(&selected, &config).map_err(|e| match e {
        EnsembleError::BadWeight { .. } => usage(e.to_string()),
        other => anyhow!(other),
    })?;
    let mut w = create(&output)?;
    write_predictions(&mut w, &combined, delimiter)?;
    w.flush()?;
    log::info!("wrote {} predictions from {} models", combined.len(), selected.len());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, f: FileConfig) -> Result<()> {
    let predictions = required(a.predictions, "predictions")?;
    let truth = required(a.truth.or(f.truth), "truth")?;
    let hierarchy = a.hierarchy.or(f.hierarchy);
    let delimiter = parse_delimiter(a.delimiter.or(f.delimiter))?;
    let format = a.format.unwrap_or_else(|| "table".into());
    if format != "table" && format != "kv" {
        return Err(usage(format!("--format must be table or kv, got {format:?}")));
    }
    log::info!(
        "evaluate: predictions = {}, truth = {}, hierarchy = {}, format = {format}, per_class = {}",
        predictions.display(),
        truth.display(),
        hierarchy.as_ref().map_or("none".into(), |p| p.display().to_string()),
        a.per_class
    );
    let p = read_set(&predictions, delimiter, "predictions")?;
    let t = read_set(&truth, delimiter, "truth")?;
    let report = evaluate(&p, &t)?;
    let levels = match &hierarchy {
        Some(path) => {
            let tax = Taxonomy::read_hierarchy(open(path)?, delimiter)?;
            Some(level_rollup(&p, &t, &tax)?)
        }
        None => None,
    };
    let text = match format.as_str() {
        "kv" => report.to_key_values(levels.as_deref(), a.per_class),
        _ => report.to_table(levels.as_deref(), a.per_class),
    };
    let mut out: Box<dyn Write> = match &a.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout())),
    };
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
