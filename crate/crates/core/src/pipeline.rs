//! End-to-end training and prediction.
//!
//! Training runs ingest → tokenize → subsample → vocabulary → vectorize →
//! train and produces a [`TrainedPipeline`]: the vocabulary plus either a
//! flat one-versus-all model or a top-down hierarchical one. Top-down
//! models can instead give every node its own vocabulary, built from the
//! node's training slice with its own document frequencies.
//!
//! A trained pipeline is stored as a directory holding `model.tsv` and
//! either `vocab.tsv` or one `vocab-node-NNN.tsv` per node classifier, in
//! node order.
//!
//! Every random choice derives its seed from [`PipelineConfig::seed`] and
//! a stage name (see [`derive_seed`]), and all parallel stages merge their
//! results in a fixed order, so output does not depend on thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{
    derive_taxonomy, load_records, CorpusError, LeafLabel, LoadOptions, OnMalformed, ProductRecord, Taxonomy,
};
use crate::ensemble::PredictionSet;
use crate::features::{
    build_vocabulary, document_tokens, vectorize, FeatureError, MarqueMode, SparseVector, VectorizerConfig, Vocabulary,
    VocabularyFormatError,
};
use crate::hierarchy::{
    decision_slices, descend, predict_topdown, train_slice, train_topdown, DecisionNode, HierarchicalModel,
    HierarchyError, NodeModel, PruneLevels, TrainedNode, PER_NODE_VOCAB,
};
use crate::linear::{predict_ova, train_ova, LinearError, OvaModel, TrainConfig, TrainReport};
use crate::sampling::{cap_for_fraction, downsample, tuning_subsample, SamplerConfig, SamplingError};
use crate::seed::derive_seed;
use crate::textprep::TokenSequence;

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const MODEL_FILE: &str = "model.tsv";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("{path}: {source}")]
    Vocabulary {
        path: String,
        source: VocabularyFormatError,
    },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("training file has no usable labeled records")]
    NoTrainingData,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TrainMode {
    #[default]
    Flat,
    TopDown,
    /// Top-down with level 1 removed from the decision path.
    TopDownPruned,
}

impl FromStr for TrainMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(TrainMode::Flat),
            "topdown" => Ok(TrainMode::TopDown),
            "topdown-pruned" | "topdown_pruned" => Ok(TrainMode::TopDownPruned),
            _ => Err(PipelineError::Usage(format!(
                "mode must be flat, topdown or topdown-pruned, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Flat => "flat",
            TrainMode::TopDown => "topdown",
            TrainMode::TopDownPruned => "topdown-pruned",
        })
    }
}

/// Whether top-down nodes share one vocabulary or each build their own.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VocabScope {
    #[default]
    Global,
    PerNode,
}

impl FromStr for VocabScope {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(VocabScope::Global),
            "per-node" | "per_node" => Ok(VocabScope::PerNode),
            _ => Err(PipelineError::Usage(format!(
                "vocabulary scope must be global or per-node, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for VocabScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VocabScope::Global => "global",
            VocabScope::PerNode => "per-node",
        })
    }
}

/// Which training records to keep. Stages apply in field order: the
/// tuning class subset first, then the per-class cap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SamplingPlan {
    /// Keep only this many randomly chosen classes.
    pub tuning_classes: Option<usize>,
    pub per_class_cap: Option<usize>,
    /// Pick the cap that keeps about this fraction of the data. Ignored
    /// when an explicit cap is set.
    pub target_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub vectorizer: VectorizerConfig,
    pub sampling: SamplingPlan,
    /// Solver settings; the shuffling seed is replaced by one derived
    /// from `seed`.
    pub train: TrainConfig,
    pub mode: TrainMode,
    /// Budget and weighting apply to each node vocabulary separately.
    pub vocab_scope: VocabScope,
    pub delimiter: u8,
    pub on_malformed: OnMalformed,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            vectorizer: VectorizerConfig::default(),
            sampling: SamplingPlan::default(),
            train: TrainConfig::default(),
            mode: TrainMode::Flat,
            vocab_scope: VocabScope::Global,
            delimiter: b';',
            on_malformed: OnMalformed::Abort,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.vectorizer.validate()?;
        self.train.validate()?;
        if self.sampling.per_class_cap == Some(0) {
            return Err(SamplingError::ZeroCap.into());
        }
        if let Some(f) = self.sampling.target_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(SamplingError::BadFraction(f).into());
            }
        }
        if self.vocab_scope == VocabScope::PerNode && self.mode == TrainMode::Flat {
            return Err(PipelineError::Usage(
                "per-node vocabularies need a top-down mode".into(),
            ));
        }
        if self.sampling.tuning_classes == Some(0) {
            return Err(PipelineError::Usage("tuning class count must be positive".into()));
        }
        Ok(())
    }

    /// Multi-line `key = value` rendering of every setting.
    pub fn describe(&self) -> String {
        let v = &self.vectorizer;
        let s = &self.sampling;
        let t = &self.train;
        let opt = |x: Option<String>| x.unwrap_or_else(|| "none".into());
        [
            format!("mode = {}", self.mode),
            format!("seed = {}", self.seed),
            format!("delimiter = {:?}", self.delimiter as char),
            format!("on_malformed = {:?}", self.on_malformed),
            format!("vocab_scope = {}", self.vocab_scope),
            format!("ngrams = {}", v.ngram_orders),
            format!("budget = {}", v.budget),
            format!("weighting = {}", v.weighting),
            format!("alpha = {}", v.alpha),
            format!("marque = {}", v.marque_mode),
            format!("tuning_classes = {}", opt(s.tuning_classes.map(|x| x.to_string()))),
            format!("per_class_cap = {}", opt(s.per_class_cap.map(|x| x.to_string()))),
            format!("target_fraction = {}", opt(s.target_fraction.map(|x| x.to_string()))),
            format!("C = {}", t.c),
            format!("bias = {}", t.bias),
            format!("tolerance = {}", t.tolerance),
            format!("max_iterations = {}", t.max_iterations),
        ]
        .join("\n")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Flat(OvaModel),
    Hierarchical(HierarchicalModel),
}

impl Model {
    fn vocab_fingerprint(&self) -> &str {
        match self {
            Model::Flat(m) => m.vocab_fingerprint(),
            Model::Hierarchical(m) => m.vocab_fingerprint(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)] // one per pipeline
pub enum Vocabularies {
    Global(Vocabulary),
    /// One per node classifier of a hierarchical model; constant nodes
    /// have none.
    PerNode(BTreeMap<DecisionNode, Vocabulary>),
}

impl Vocabularies {
    fn marque_mode(&self) -> MarqueMode {
        match self {
            Vocabularies::Global(v) => v.config().marque_mode,
            Vocabularies::PerNode(m) => m.values().next().map_or(MarqueMode::None, |v| v.config().marque_mode),
        }
    }

    /// Total feature count over all vocabularies.
    pub fn dim(&self) -> usize {
        match self {
            Vocabularies::Global(v) => v.dim(),
            Vocabularies::PerNode(m) => m.values().map(Vocabulary::dim).sum(),
        }
    }
}

#[derive(Debug)]
pub struct TrainedPipeline {
    pub vocabulary: Vocabularies,
    pub model: Model,
}

/// What happened during training, for the command-line report.
#[derive(Clone, Debug, Default)]
pub struct TrainSummary {
    pub records: usize,
    pub kept: usize,
    pub classes: usize,
    /// Summed over node vocabularies when they are per node.
    pub features: usize,
    pub binary_problems: usize,
    pub unconverged: usize,
    pub max_iterations_used: usize,
    pub node_models: usize,
    pub warnings: Vec<String>,
}

impl TrainSummary {
    fn absorb(&mut self, reports: &[TrainReport]) {
        self.binary_problems += reports.len();
        self.unconverged += reports.iter().filter(|r| !r.converged).count();
        let max = reports.iter().map(|r| r.iterations).max().unwrap_or(0);
        self.max_iterations_used = self.max_iterations_used.max(max);
    }
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records          {}", self.records)?;
        writeln!(f, "kept             {}", self.kept)?;
        writeln!(f, "classes          {}", self.classes)?;
        writeln!(f, "features         {}", self.features)?;
        if self.node_models > 0 {
            writeln!(f, "node models      {}", self.node_models)?;
        }
        writeln!(f, "binary problems  {}", self.binary_problems)?;
        writeln!(f, "max iterations   {}", self.max_iterations_used)?;
        write!(f, "unconverged      {}", self.unconverged)?;
        for w in &self.warnings {
            write!(f, "\nwarning: {w}")?;
        }
        Ok(())
    }
}

/// Indices of the records kept by the sampling plan, in input order.
pub fn select_training(labels: &[LeafLabel], plan: &SamplingPlan, seed: u64) -> Result<Vec<usize>, PipelineError> {
    let mut kept: Vec<usize> = (0..labels.len()).collect();
    if let Some(k) = plan.tuning_classes {
        let cfg = SamplerConfig {
            seed: derive_seed(seed, "tuning"),
            tuning_class_count: k,
            ..SamplerConfig::default()
        };
        kept = tuning_subsample(labels, &cfg);
    }
    let sub: Vec<LeafLabel> = kept.iter().map(|&i| labels[i].clone()).collect();
    let cap = match (plan.per_class_cap, plan.target_fraction) {
        (Some(cap), _) => Some(cap),
        (None, Some(f)) => {
            let cap = cap_for_fraction(&sub, f)?;
            log::info!("target fraction {f} gives a per-class cap of {cap}");
            Some(cap)
        }
        (None, None) => None,
    };
    let cfg = SamplerConfig {
        per_class_cap: cap,
        seed: derive_seed(seed, "downsample"),
        ..SamplerConfig::default()
    };
    Ok(downsample(&sub, &cfg)?.into_iter().map(|j| kept[j]).collect())
}

/// Tokenizes and vectorizes records in parallel, preserving order.
pub fn featurize(records: &[ProductRecord], vocab: &Vocabulary) -> Vec<SparseVector> {
    let mode = vocab.config().marque_mode;
    records
        .par_iter()
        .map(|r| vectorize(&document_tokens(r, mode), &r.marque, vocab))
        .collect()
}

/// Trains on in-memory records. `taxonomy` must contain every training
/// label; without one, a flat taxonomy over the kept labels is used.
pub fn train_records(
    records: &[ProductRecord],
    taxonomy: Option<&Taxonomy>,
    config: &PipelineConfig,
) -> Result<(TrainedPipeline, TrainSummary), PipelineError> {
    config.validate()?;
    let labeled: Vec<&ProductRecord> = records.iter().filter(|r| r.label.is_some()).collect();
    if labeled.is_empty() {
        return Err(PipelineError::NoTrainingData);
    }
    let labels: Vec<LeafLabel> = labeled.iter().map(|r| r.label.clone().expect("labeled")).collect();
    let kept = select_training(&labels, &config.sampling, config.seed)?;
    let records: Vec<&ProductRecord> = kept.iter().map(|&i| labeled[i]).collect();
    let labels: Vec<LeafLabel> = kept.iter().map(|&i| labels[i].clone()).collect();
    let mut summary = TrainSummary {
        records: labeled.len(),
        kept: records.len(),
        ..TrainSummary::default()
    };

    let mode = config.vectorizer.marque_mode;
    let tokens: Vec<TokenSequence> = records.par_iter().map(|r| document_tokens(r, mode)).collect();
    let train_cfg = TrainConfig {
        seed: derive_seed(config.seed, "train"),
        ..config.train.clone()
    };
    let owned;
    let taxonomy = match taxonomy {
        Some(t) => {
            t.check_labels(&labels)?;
            t
        }
        None if config.mode == TrainMode::Flat => {
            owned = Taxonomy::flat(&labels);
            &owned
        }
        None => {
            return Err(PipelineError::Usage(format!(
                "{} mode needs a hierarchy file",
                config.mode
            )))
        }
    };
    summary.classes = taxonomy.leaf_count();

    let prune = match config.mode {
        TrainMode::Flat => {
            let (vocab, vectors) = fit_features(tokens, &records, &config.vectorizer)?;
            let classes = taxonomy.leaf_labels();
            let (m, reports) = train_ova(
                &vectors,
                &labels,
                &classes,
                vocab.dim(),
                &train_cfg,
                vocab.fingerprint(),
            )?;
            summary.absorb(&reports);
            summary.features = vocab.dim();
            let pipeline = TrainedPipeline {
                vocabulary: Vocabularies::Global(vocab),
                model: Model::Flat(m),
            };
            return Ok((pipeline, summary));
        }
        _ if taxonomy.depth() < 2 && config.mode == TrainMode::TopDownPruned => {
            return Err(PipelineError::Usage(
                "pruning needs a taxonomy with at least 2 levels".into(),
            ));
        }
        TrainMode::TopDownPruned => PruneLevels::first_level(),
        TrainMode::TopDown => PruneLevels::none(),
    };
    let (vocabulary, (m, report)) = match config.vocab_scope {
        VocabScope::Global => {
            let (vocab, vectors) = fit_features(tokens, &records, &config.vectorizer)?;
            let trained = train_topdown(
                &vectors,
                &labels,
                taxonomy,
                &prune,
                vocab.dim(),
                &train_cfg,
                vocab.fingerprint(),
            )?;
            (Vocabularies::Global(vocab), trained)
        }
        VocabScope::PerNode => {
            let slices = decision_slices(&labels, taxonomy, &prune)?;
            let trained: Vec<(Option<Vocabulary>, TrainedNode)> = slices
                .par_iter()
                .map(|s| {
                    if !s.needs_classifier() {
                        let node = train_slice(taxonomy, s, std::iter::empty(), 0, &train_cfg, PER_NODE_VOCAB)?;
                        return Ok((None, node));
                    }
                    let sub_tokens = s.rows.iter().map(|&i| tokens[i].clone()).collect();
                    let sub_records: Vec<&ProductRecord> = s.rows.iter().map(|&i| records[i]).collect();
                    let (vocab, vectors) = fit_features(sub_tokens, &sub_records, &config.vectorizer)?;
                    let node = train_slice(taxonomy, s, &vectors, vocab.dim(), &train_cfg, vocab.fingerprint())?;
                    Ok((Some(vocab), node))
                })
                .collect::<Result<_, PipelineError>>()?;
            let mut vocabs = BTreeMap::new();
            let mut nodes = Vec::with_capacity(slices.len());
            for (slice, (vocab, node)) in slices.into_iter().zip(trained) {
                if let Some(v) = vocab {
                    vocabs.insert(slice.node, v);
                }
                nodes.push((slice, node));
            }
            let assembled = HierarchicalModel::assemble(taxonomy, &prune, nodes, 0, PER_NODE_VOCAB);
            (Vocabularies::PerNode(vocabs), assembled)
        }
    };
    for reports in report.node_reports.values() {
        summary.absorb(reports);
    }
    summary.features = vocabulary.dim();
    summary.node_models = m.node_count();
    summary.warnings = report.warnings;
    Ok((
        TrainedPipeline {
            vocabulary,
            model: Model::Hierarchical(m),
        },
        summary,
    ))
}

/// Builds a vocabulary over `tokens` (brand flags from `records`) and
/// vectorizes the same documents with it.
fn fit_features(
    tokens: Vec<TokenSequence>,
    records: &[&ProductRecord],
    config: &VectorizerConfig,
) -> Result<(Vocabulary, Vec<SparseVector>), PipelineError> {
    let mut vocab = build_vocabulary(&tokens, config)?;
    vocab.fit_marques(records.iter().map(|r| r.marque.as_str()));
    let vectors = tokens
        .par_iter()
        .zip(records.par_iter())
        .map(|(t, r)| vectorize(t, &r.marque, &vocab))
        .collect();
    Ok((vocab, vectors))
}

/// Loads the training file (and hierarchy file, if any) and trains.
pub fn train_file(
    train_path: &Path,
    hierarchy_path: Option<&Path>,
    config: &PipelineConfig,
) -> Result<(TrainedPipeline, TrainSummary), PipelineError> {
    config.validate()?;
    if config.mode != TrainMode::Flat && hierarchy_path.is_none() {
        return Err(PipelineError::Usage(format!("{} mode needs --hierarchy", config.mode)));
    }
    let opts = LoadOptions {
        delimiter: config.delimiter,
        has_labels: true,
        on_malformed: config.on_malformed,
    };
    let loaded = load_records(train_path, &opts)?;
    for e in &loaded.skipped {
        log::warn!("skipped malformed record: {e}");
    }
    let taxonomy = match hierarchy_path {
        Some(p) => {
            let labels: Vec<LeafLabel> = loaded.records.iter().filter_map(|r| r.label.clone()).collect();
            Some(derive_taxonomy(&labels, Some(p), config.delimiter)?)
        }
        None => None,
    };
    train_records(&loaded.records, taxonomy.as_ref(), config)
}

impl TrainedPipeline {
    pub fn predict_one(&self, record: &ProductRecord) -> Result<LeafLabel, PipelineError> {
        let tokens = document_tokens(record, self.vocabulary.marque_mode());
        self.predict_tokens(&tokens, &record.marque)
    }

    fn predict_tokens(&self, tokens: &TokenSequence, brand: &str) -> Result<LeafLabel, PipelineError> {
        Ok(match (&self.vocabulary, &self.model) {
            (Vocabularies::Global(v), Model::Flat(m)) => {
                predict_ova(m, &vectorize(tokens, brand, v), v.fingerprint())?.label
            }
            (Vocabularies::Global(v), Model::Hierarchical(m)) => {
                predict_topdown(m, &vectorize(tokens, brand, v), v.fingerprint())?.leaf
            }
            (Vocabularies::PerNode(vocabs), Model::Hierarchical(m)) => {
                descend(m, |node, ova| {
                    let vocab = vocabs
                        .get(&node)
                        .ok_or_else(|| HierarchyError::Io("node without a vocabulary".into()))?;
                    ova.check_fingerprint(vocab.fingerprint())?;
                    Ok(ova.best_class(&vectorize(tokens, brand, vocab))?)
                })?
                .leaf
            }
            (Vocabularies::PerNode(_), Model::Flat(_)) => {
                return Err(PipelineError::Usage(
                    "per-node vocabularies need a hierarchical model".into(),
                ))
            }
        })
    }

    /// One label per record, in input order.
    pub fn predict(&self, records: &[ProductRecord]) -> Result<Vec<LeafLabel>, PipelineError> {
        let mode = self.vocabulary.marque_mode();
        records
            .par_iter()
            .map(|r| self.predict_tokens(&document_tokens(r, mode), &r.marque))
            .collect()
    }

    /// Predicts every record of a test file; a label column, if present,
    /// is ignored.
    pub fn predict_file(
        &self,
        test_path: &Path,
        delimiter: u8,
        model_id: &str,
    ) -> Result<PredictionSet, PipelineError> {
        let opts = LoadOptions {
            delimiter,
            has_labels: false,
            on_malformed: OnMalformed::Abort,
        };
        let loaded = load_records(test_path, &opts)?;
        let labels = self.predict(&loaded.records)?;
        let ids = loaded.records.into_iter().map(|r| r.id).collect();
        Ok(PredictionSet::new(model_id, ids, labels))
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let write_vocab = |vocab: &Vocabulary, path: &Path| -> Result<(), PipelineError> {
            let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
            vocab.write_to(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
        };
        match &self.vocabulary {
            Vocabularies::Global(v) => write_vocab(v, &dir.join(VOCAB_FILE))?,
            Vocabularies::PerNode(vocabs) => {
                for (k, v) in vocabs.values().enumerate() {
                    write_vocab(v, &dir.join(node_vocab_file(k)))?;
                }
            }
        }

        let model_path = dir.join(MODEL_FILE);
        let mut w = BufWriter::new(File::create(&model_path).map_err(io_err(&model_path))?);
        match &self.model {
            Model::Flat(m) => m.write_to(&mut w)?,
            Model::Hierarchical(m) => m.write_to(&mut w)?,
        }
        w.flush().map_err(io_err(&model_path))?;
        Ok(())
    }

    /// Loads a saved pipeline and checks that model and vocabulary belong
    /// together.
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let model_path = dir.join(MODEL_FILE);
        let file = File::open(&model_path).map_err(io_err(&model_path))?;
        let mut reader = BufReader::new(file);
        let starts_with = |r: &mut BufReader<File>, prefix: &[u8]| -> Result<bool, PipelineError> {
            Ok(r.fill_buf().map_err(io_err(&model_path))?.starts_with(prefix))
        };
        let model = if starts_with(&mut reader, b"prodcat-ova\t")? {
            Model::Flat(OvaModel::read_from(reader)?)
        } else if starts_with(&mut reader, b"prodcat-hierarchy\t")? {
            Model::Hierarchical(HierarchicalModel::read_from(reader)?)
        } else {
            return Err(PipelineError::Usage(format!(
                "{} is not a model file",
                model_path.display()
            )));
        };

        let vocabulary = match &model {
            Model::Hierarchical(h) if h.vocab_fingerprint() == PER_NODE_VOCAB => {
                let mut vocabs = BTreeMap::new();
                let classifiers = h.decision_nodes().filter_map(|n| match h.node_model(n) {
                    Some(NodeModel::Classifier(ova)) => Some((n, ova)),
                    _ => None,
                });
                for (k, (node, ova)) in classifiers.enumerate() {
                    let vocab = read_vocab(&dir.join(node_vocab_file(k)))?;
                    ova.check_fingerprint(vocab.fingerprint())?;
                    vocabs.insert(node, vocab);
                }
                Vocabularies::PerNode(vocabs)
            }
            _ => {
                let vocab = read_vocab(&dir.join(VOCAB_FILE))?;
                if model.vocab_fingerprint() != vocab.fingerprint() {
                    return Err(LinearError::FingerprintMismatch {
                        expected: model.vocab_fingerprint().to_string(),
                        found: vocab.fingerprint().to_string(),
                    }
                    .into());
                }
                Vocabularies::Global(vocab)
            }
        };
        Ok(TrainedPipeline { vocabulary, model })
    }
}

fn node_vocab_file(k: usize) -> String {
    format!("vocab-node-{k:03}.tsv")
}

fn read_vocab(path: &Path) -> Result<Vocabulary, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    Vocabulary::read_from(BufReader::new(file)).map_err(|source| PipelineError::Vocabulary {
        path: path.display().to_string(),
        source,
    })
}
