//! The `nvsm` command line.

use crate::container::{load_model, load_store, save_store, StoredModel};
use crate::error::{Error, Result, EXIT_USAGE};
use crate::formats::{self, load_stopwords, read_text, write_text};
use crate::manifest::{Artifact, RunManifest};
use crate::pipeline::{self, EncodedQuery, Selection, Validation};
use crate::stats;
use crate::synthetic::{self, SyntheticConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nvsm_core::corpus::{DocumentStore, DEFAULT_MAX_VOCABULARY};
use nvsm_core::eval::{titlestat_rel, MetricReport};
use nvsm_core::fusion::{
    self, Feature, FeatureMatrix, FoldPlan, LexicalFeature, ModelFeature, QueryTerms, RunFeature,
};
use nvsm_core::lexical::{QueryLikelihood, Smoothing};
use nvsm_core::retrieval::{self, DEFAULT_DEPTH};
use nvsm_core::{RankedList, TrainConfig};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x6e76_736d;

#[derive(Debug, Parser)]
#[command(
    name = "nvsm",
    version,
    about = "Neural vector space model: unsupervised document retrieval"
)]
pub struct Cli {
    /// Maximum number of worker threads (default: one per core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a corpus and persist the document store.
    Ingest(IngestArgs),
    /// Train one model per n-gram width, checkpointing every iteration.
    Train(TrainArgs),
    /// Rank documents for a single free-text query.
    Query(QueryArgs),
    /// Write a TREC run for a topics file.
    Run(RunArgs),
    /// Combine rankers linearly with cross-validated weights.
    Fuse(FuseArgs),
    /// Score a run file against qrels.
    Eval(EvalArgs),
    /// Word-norm frequency analysis and titlestat table.
    Analyze(AnalyzeArgs),
    /// Write a synthetic topic-clustered corpus with topics and qrels.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory with one document per file, or a `name<TAB>text` file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Stopword file (default: the bundled English list).
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_VOCABULARY)]
    pub max_vocab: usize,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectArg {
    Last,
    Best,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// TOML file with training settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// N-gram widths, one model each (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub doc_dim: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub regularization: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Which checkpoint becomes `model-n<width>.nvsm`.
    #[arg(long, value_enum, default_value_t = SelectArg::Last)]
    pub select: SelectArg,
    #[arg(long)]
    pub validation_topics: Option<PathBuf>,
    #[arg(long)]
    pub validation_qrels: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, short)]
    pub query: String,
    #[arg(short, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    /// A single NVSM model.
    #[arg(long, conflicts_with_all = ["ensemble", "lexical"])]
    pub model: Option<PathBuf>,
    /// Models combined by standardized score summation.
    #[arg(long, num_args = 1.., conflicts_with = "lexical")]
    pub ensemble: Vec<PathBuf>,
    /// Query likelihood, `dirichlet:<mu>` or `jm:<lambda>`.
    #[arg(long)]
    pub lexical: Option<String>,
    #[arg(short, default_value_t = DEFAULT_DEPTH)]
    pub k: usize,
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// External run files used as features.
    #[arg(long = "run")]
    pub runs: Vec<PathBuf>,
    /// NVSM models used as features (need --store and --topics).
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Query-likelihood features, `dirichlet:<mu>` or `jm:<lambda>`.
    #[arg(long = "lexical")]
    pub lexical: Vec<String>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub topics: Option<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, default_value_t = fusion::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = fusion::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "fusion")]
    pub tag: String,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Write the `term collection_frequency norm` table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, requires = "topics")]
    pub qrels: Option<PathBuf>,
    #[arg(long, requires = "qrels")]
    pub topics: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub topics: usize,
    #[arg(long, default_value_t = 200)]
    pub documents: usize,
}

/// Training settings as they may appear in a config file.
#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub widths: Option<Vec<usize>>,
    pub word_dim: Option<usize>,
    pub doc_dim: Option<usize>,
    pub negatives: Option<usize>,
    pub learning_rate: Option<f64>,
    pub regularization: Option<f64>,
    pub batch_size: Option<usize>,
    pub iterations: Option<u32>,
    pub seed: Option<u64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
}

impl TrainSettings {
    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: TrainSettings) -> TrainSettings {
        TrainSettings {
            widths: self.widths.or(lower.widths),
            word_dim: self.word_dim.or(lower.word_dim),
            doc_dim: self.doc_dim.or(lower.doc_dim),
            negatives: self.negatives.or(lower.negatives),
            learning_rate: self.learning_rate.or(lower.learning_rate),
            regularization: self.regularization.or(lower.regularization),
            batch_size: self.batch_size.or(lower.batch_size),
            iterations: self.iterations.or(lower.iterations),
            seed: self.seed.or(lower.seed),
            adam_beta1: self.adam_beta1.or(lower.adam_beta1),
            adam_beta2: self.adam_beta2.or(lower.adam_beta2),
            adam_epsilon: self.adam_epsilon.or(lower.adam_epsilon),
        }
    }

    /// Resolves against the defaults: one config per width.
    pub fn resolve(&self) -> Result<(Vec<usize>, TrainConfig)> {
        let d = TrainConfig::default();
        let mut c = TrainConfig {
            word_dim: self.word_dim.unwrap_or(d.word_dim),
            doc_dim: self.doc_dim.unwrap_or(d.doc_dim),
            ngram_width: d.ngram_width,
            negatives: self.negatives.unwrap_or(d.negatives),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            regularization: self.regularization.unwrap_or(d.regularization),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            iterations: self.iterations.unwrap_or(d.iterations),
            adam: d.adam,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
        };
        c.adam.beta1 = self.adam_beta1.unwrap_or(c.adam.beta1);
        c.adam.beta2 = self.adam_beta2.unwrap_or(c.adam.beta2);
        c.adam.epsilon = self.adam_epsilon.unwrap_or(c.adam.epsilon);
        let widths = self.widths.clone().unwrap_or_else(|| vec![d.ngram_width]);
        let unique: BTreeSet<usize> = widths.iter().copied().collect();
        if widths.is_empty() || unique.len() != widths.len() {
            return Err(Error::Usage(
                "n-gram widths must be a non-empty list without repeats".into(),
            ));
        }
        for &n in &widths {
            let mut check = c.clone();
            check.ngram_width = n;
            check.validate().map_err(|e| Error::Usage(e.to_string()))?;
        }
        Ok((widths, c))
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("nvsm: error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(e.to_string()))?;
    // the pool needs a Send closure, so output is buffered and copied out
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| {
        let sink: &mut dyn Write = &mut buf;
        match cli.command {
            Command::Ingest(a) => cmd_ingest(&a, sink),
            Command::Train(a) => cmd_train(&a, sink),
            Command::Query(a) => cmd_query(&a, sink),
            Command::Run(a) => cmd_run(&a, sink),
            Command::Fuse(a) => cmd_fuse(&a, sink),
            Command::Eval(a) => cmd_eval(&a, sink),
            Command::Analyze(a) => cmd_analyze(&a, sink),
            Command::Generate(a) => cmd_generate(&a, sink),
        }
    });
    emit(out, &String::from_utf8_lossy(&buf))?;
    result
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_or_emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => emit(out, text),
    }
}

fn load_checked_model(path: &Path, store: &DocumentStore) -> Result<StoredModel> {
    let model = load_model(path)?;
    model
        .check_store(store)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    Ok(model)
}

fn read_topics(path: &Path) -> Result<Vec<(String, String)>> {
    formats::parse_topics(&read_text(path)?)
}

fn warn_skipped(skipped: &[String]) {
    for q in skipped {
        eprintln!("nvsm: warning: query {q} has no in-vocabulary terms and was skipped");
    }
}

/// Parses `dirichlet:<mu>` or `jm:<lambda>`.
pub fn parse_smoothing(spec: &str) -> Result<Smoothing> {
    let bad = || {
        Error::Usage(format!(
            "bad smoothing `{spec}`; expected dirichlet:<mu> or jm:<lambda>"
        ))
    };
    let (kind, value) = spec.split_once(':').ok_or_else(bad)?;
    let value: f64 = value.parse().map_err(|_| bad())?;
    let s = match kind {
        "dirichlet" | "d" => Smoothing::Dirichlet { mu: value },
        "jm" | "jelinek-mercer" => Smoothing::JelinekMercer { lambda: value },
        _ => return Err(bad()),
    };
    s.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(s)
}

pub fn cmd_ingest(a: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    let stopwords = load_stopwords(a.stopwords.as_deref())?;
    let raw = formats::read_corpus(&a.corpus)?;
    let store = DocumentStore::ingest(&raw, &stopwords, a.max_vocab)?;
    save_store(&a.output, &store)?;
    emit(
        out,
        &format!(
            "ingested {} documents, {} terms, {} tokens into {}\n",
            store.len(),
            store.vocabulary().len(),
            store.total_token_count(),
            a.output.display()
        ),
    )
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let file_settings = match &a.config {
        Some(p) => toml::from_str::<TrainSettings>(&read_text(p)?)
            .map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?,
        None => TrainSettings::default(),
    };
    let flags = TrainSettings {
        widths: a.widths.clone(),
        word_dim: a.word_dim,
        doc_dim: a.doc_dim,
        negatives: a.negatives,
        learning_rate: a.learning_rate,
        regularization: a.regularization,
        batch_size: a.batch_size,
        iterations: a.iterations,
        seed: a.seed,
        ..TrainSettings::default()
    };
    let settings = flags.over(file_settings);
    let (widths, base) = settings.resolve()?;
    let selection = match a.select {
        SelectArg::Last => Selection::Last,
        SelectArg::Best => Selection::Best,
    };
    let store = load_store(&a.store)?;
    let mut inputs = vec![Artifact::of(&a.store)?];
    let validation_data = match (&a.validation_topics, &a.validation_qrels) {
        (Some(t), Some(q)) => {
            let stopwords = load_stopwords(a.stopwords.as_deref())?;
            inputs.push(Artifact::of(t)?);
            inputs.push(Artifact::of(q)?);
            let queries = pipeline::encode_topics(&store, &read_topics(t)?, &stopwords);
            Some((queries, formats::parse_qrels(&read_text(q)?)?))
        }
        (None, None) => None,
        _ => {
            return Err(Error::Usage(
                "validation needs both --validation-topics and --validation-qrels".into(),
            ))
        }
    };
    if selection == Selection::Best && validation_data.is_none() {
        return Err(Error::Usage(
            "--select best needs --validation-topics and --validation-qrels".into(),
        ));
    }
    let validation = validation_data
        .as_ref()
        .map(|(queries, qrels)| Validation { queries, qrels });
    std::fs::create_dir_all(&a.output_dir).map_err(|e| Error::io(&a.output_dir, e))?;

    use rayon::prelude::*;
    let results: Vec<Result<(pipeline::TrainedWidth, f64)>> = widths
        .par_iter()
        .map(|&n| {
            let t = Instant::now();
            let mut config = base.clone();
            config.ngram_width = n;
            let trained = pipeline::train_width(
                &store,
                config,
                &a.output_dir,
                selection,
                validation.as_ref(),
            )?;
            Ok((trained, t.elapsed().as_secs_f64()))
        })
        .collect();
    let mut outputs = Vec::new();
    let mut timings = BTreeMap::new();
    let mut report = String::new();
    for r in results {
        let (t, secs) = r?;
        for p in &t.checkpoints {
            outputs.push(Artifact::of(p)?);
        }
        outputs.push(Artifact::of(&t.log)?);
        outputs.push(Artifact::of(&t.selected)?);
        timings.insert(format!("train_n{}", t.ngram_width), secs);
        for (i, loss) in t.mean_losses.iter().enumerate() {
            let map = t
                .validation_map
                .get(i)
                .map(|m| format!(" validation_map {m:.4}"))
                .unwrap_or_default();
            report.push_str(&format!(
                "n {} iteration {} mean_loss {loss:.6}{map}\n",
                t.ngram_width,
                i + 1
            ));
        }
        report.push_str(&format!(
            "n {} selected iteration {} -> {}\n",
            t.ngram_width,
            t.selected_iteration,
            t.selected.display()
        ));
    }
    timings.insert("total".into(), started.elapsed().as_secs_f64());
    let manifest_path = a.output_dir.join("manifest.json");
    let config_echo = serde_json::json!({
        "widths": widths,
        "word_dim": base.word_dim,
        "doc_dim": base.doc_dim,
        "negatives": base.negatives,
        "learning_rate": base.learning_rate,
        "regularization": base.regularization,
        "batch_size": base.batch_size,
        "iterations": base.iterations,
        "adam_beta1": base.adam.beta1,
        "adam_beta2": base.adam.beta2,
        "adam_epsilon": base.adam.epsilon,
        "seed": base.seed,
        "select": format!("{:?}", selection).to_lowercase(),
    });
    RunManifest {
        command: "train".into(),
        seed: base.seed,
        config: config_echo,
        inputs,
        outputs,
        timings,
    }
    .write(&manifest_path)?;
    report.push_str(&format!(
        "seed {} manifest {}\n",
        base.seed,
        manifest_path.display()
    ));
    emit(out, &report)
}

pub fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> Result<()> {
    let store = load_store(&a.store)?;
    let model = load_checked_model(&a.model, &store)?;
    let stopwords = load_stopwords(a.stopwords.as_deref())?;
    let terms = store.encode_query(&a.query, &stopwords);
    let list = retrieval::rank("query", &terms, &model.params, &store, a.k)?;
    let mut text = String::new();
    for e in &list.entries {
        text.push_str(&format!("{:>4}  {:<24} {:.6}\n", e.rank, e.doc, e.score));
    }
    emit(out, &text)
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let store = load_store(&a.store)?;
    let stopwords = load_stopwords(a.stopwords.as_deref())?;
    let queries = pipeline::encode_topics(&store, &read_topics(&a.topics)?, &stopwords);
    let (lists, skipped, default_tag) = if let Some(path) = &a.model {
        let model = load_checked_model(path, &store)?;
        let (l, s) = pipeline::model_run(&store, &model.params, &queries, a.k)?;
        (l, s, format!("nvsm-n{}", model.params.ngram_width))
    } else if !a.ensemble.is_empty() {
        let models = a
            .ensemble
            .iter()
            .map(|p| load_checked_model(p, &store))
            .collect::<Result<Vec<_>>>()?;
        let members: Vec<_> = models.iter().map(|m| &m.params).collect();
        let (l, s) = pipeline::ensemble_run(&store, &members, &queries, a.k)?;
        (l, s, format!("nvsm-ensemble{}", members.len()))
    } else if let Some(spec) = &a.lexical {
        let qlm = QueryLikelihood::new(&store, parse_smoothing(spec)?)?;
        let (l, s) = pipeline::lexical_run(&qlm, &queries, a.k)?;
        (l, s, "qlm".to_string())
    } else {
        return Err(Error::Usage(
            "give one of --model, --ensemble or --lexical".into(),
        ));
    };
    warn_skipped(&skipped);
    let text = formats::format_run(&lists, a.tag.as_deref().unwrap_or(&default_tag))?;
    write_or_emit(a.output.as_deref(), &text, out)
}

pub fn cmd_fuse(a: &FuseArgs, out: &mut dyn Write) -> Result<()> {
    let qrels = formats::parse_qrels(&read_text(&a.qrels)?)?;
    let runs = a
        .runs
        .iter()
        .map(|p| Ok((p, formats::parse_run(&read_text(p)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let needs_store = !a.models.is_empty() || !a.lexical.is_empty();
    let store = match (&a.store, needs_store) {
        (Some(p), _) => Some(load_store(p)?),
        (None, true) => {
            return Err(Error::Usage(
                "--model and --lexical features need --store".into(),
            ))
        }
        (None, false) => None,
    };
    let topics = a.topics.as_deref().map(read_topics).transpose()?;
    if needs_store && topics.is_none() {
        return Err(Error::Usage(
            "--model and --lexical features need --topics".into(),
        ));
    }
    let query_ids: Vec<String> = match &topics {
        Some(t) => t.iter().map(|(q, _)| q.clone()).collect(),
        None => runs
            .iter()
            .flat_map(|(_, r)| r.lists.iter().map(|l| l.query_id.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let stopwords = load_stopwords(a.stopwords.as_deref())?;
    let query_terms: QueryTerms = match (&store, &topics) {
        (Some(s), Some(t)) => pipeline::encode_topics(s, t, &stopwords)
            .into_iter()
            .map(|EncodedQuery { id, terms }| (id, terms))
            .collect(),
        _ => QueryTerms::new(),
    };
    let models = match &store {
        Some(s) => a
            .models
            .iter()
            .map(|p| load_checked_model(p, s))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let smoothings = a
        .lexical
        .iter()
        .map(|s| parse_smoothing(s))
        .collect::<Result<Vec<_>>>()?;
    let qlms = match &store {
        Some(s) => smoothings
            .iter()
            .map(|&sm| QueryLikelihood::new(s, sm))
            .collect::<nvsm_core::Result<Vec<_>>>()?,
        None => Vec::new(),
    };

    let mut features: Vec<Box<dyn Feature + '_>> = Vec::new();
    for (p, r) in &runs {
        features.push(Box::new(RunFeature::new(
            p.display().to_string(),
            r.lists.clone(),
        )));
    }
    if let Some(s) = &store {
        for (p, m) in a.models.iter().zip(&models) {
            features.push(Box::new(ModelFeature::new(
                p.display().to_string(),
                &m.params,
                s,
                &query_terms,
            )));
        }
        for (spec, q) in a.lexical.iter().zip(&qlms) {
            features.push(Box::new(LexicalFeature::new(
                spec.clone(),
                q,
                s,
                &query_terms,
            )));
        }
    }
    if features.is_empty() {
        return Err(Error::Usage(
            "fusion needs at least one --run, --model or --lexical feature".into(),
        ));
    }
    // queries no model can rank are dropped up front
    let query_ids: Vec<String> = if query_terms.is_empty() {
        query_ids
    } else {
        let (keep, skipped): (Vec<_>, Vec<_>) = query_ids
            .into_iter()
            .partition(|q| query_terms.get(q).is_some_and(|t| !t.is_empty()));
        warn_skipped(&skipped);
        keep
    };
    let refs: Vec<&dyn Feature> = features.iter().map(|f| f.as_ref()).collect();
    let matrix = FeatureMatrix::build(&refs, &query_ids, fusion::POOL_DEPTH)?;
    let plan = FoldPlan::new(&query_ids, a.folds, a.seed)?;
    let (lists, folds) = fusion::cross_validated_fusion_with(
        &matrix,
        &qrels,
        &plan,
        a.step,
        &pipeline::parallel_grid_search,
    )?;
    for (k, f) in folds.iter().enumerate() {
        let w: Vec<String> = f.weights.iter().map(|w| format!("{w:.4}")).collect();
        eprintln!(
            "fold {k} weights [{}] test {}",
            w.join(", "),
            f.test_queries.join(",")
        );
    }
    let text = formats::format_run(&lists, &a.tag)?;
    write_or_emit(a.output.as_deref(), &text, out)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let run = formats::parse_run(&read_text(&a.run)?)?;
    let qrels = formats::parse_qrels(&read_text(&a.qrels)?)?;
    let report = MetricReport::evaluate(&run.lists, &qrels);
    write_or_emit(a.output.as_deref(), &formats::format_report(&report), out)
}

pub fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let store = load_store(&a.store)?;
    let model = load_checked_model(&a.model, &store)?;
    let luhn = stats::luhn_norm_analysis(&model.params, store.vocabulary())?;
    if let Some(p) = &a.table {
        let mut table = String::from("term\tcollection_frequency\tnorm\n");
        for row in &luhn.table {
            table.push_str(&format!(
                "{}\t{}\t{:.6}\n",
                row.term, row.collection_frequency, row.norm
            ));
        }
        write_text(p, &table)?;
    }
    let [bottom, middle, top] = luhn.partition_sizes;
    let mut text = format!(
        "luhn partition bottom {bottom} middle {middle} top {top}\n\
         luhn middle_mean {:.6} outer_mean {:.6} t {:.4} dof {:.2} p {:.3e}\n",
        luhn.middle_mean, luhn.outer_mean, luhn.test.t, luhn.test.dof, luhn.test.p
    );
    if let (Some(q), Some(t)) = (&a.qrels, &a.topics) {
        let qrels = formats::parse_qrels(&read_text(q)?)?;
        let stopwords = load_stopwords(a.stopwords.as_deref())?;
        let mut values = Vec::new();
        for query in pipeline::encode_topics(&store, &read_topics(t)?, &stopwords) {
            match titlestat_rel(&query.id, &query.terms, &qrels, &store) {
                Ok(v) => {
                    text.push_str(&format!("titlestat {} {v:.4}\n", query.id));
                    values.push(v);
                }
                Err(
                    nvsm_core::Error::NoRelevantDocument(_)
                    | nvsm_core::Error::QueryOutOfVocabulary,
                ) => {}
                Err(e) => return Err(e.into()),
            }
        }
        if !values.is_empty() {
            text.push_str(&format!(
                "titlestat all {:.4}\n",
                values.iter().sum::<f64>() / values.len() as f64
            ));
        }
    }
    emit(out, &text)
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    if a.topics == 0 || a.documents == 0 {
        return Err(Error::Usage(
            "need at least one topic and one document".into(),
        ));
    }
    let config = SyntheticConfig {
        topics: a.topics,
        documents: a.documents,
        ..SyntheticConfig::default()
    };
    let corpus = synthetic::generate(&config, a.seed);
    std::fs::create_dir_all(&a.output_dir).map_err(|e| Error::io(&a.output_dir, e))?;
    write_text(
        &a.output_dir.join("corpus.tsv"),
        &formats::format_corpus(&corpus.documents),
    )?;
    write_text(
        &a.output_dir.join("topics.tsv"),
        &formats::format_topics(&corpus.topics),
    )?;
    write_text(
        &a.output_dir.join("qrels.txt"),
        &formats::format_qrels(&corpus.qrels),
    )?;
    emit(
        out,
        &format!(
            "wrote {} documents and {} topics to {}\n",
            corpus.documents.len(),
            corpus.topics.len(),
            a.output_dir.display()
        ),
    )
}

/// Convenience for callers holding rankings in memory.
pub fn evaluate_lists(lists: &[RankedList], qrels_text: &str) -> Result<MetricReport> {
    Ok(MetricReport::evaluate(
        lists,
        &formats::parse_qrels(qrels_text)?,
    ))
}
