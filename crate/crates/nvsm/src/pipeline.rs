//! Glue shared by the command line and the tests: ranking whole topic sets,
//! parallel fusion search and checkpointed training.

use crate::container;
use crate::error::{Error, Result};
use nvsm_core::corpus::DocumentStore;
use nvsm_core::eval::{MetricReport, Qrels};
use nvsm_core::fusion::{grid_points, training_map, weight_grid, FeatureMatrix};
use nvsm_core::lexical::QueryLikelihood;
use nvsm_core::retrieval::{self, Ensemble};
use nvsm_core::trainer::Trainer;
use nvsm_core::{ModelParameters, RankedList, TermId, TrainConfig};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// A topic with its in-vocabulary term ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedQuery {
    pub id: String,
    pub terms: Vec<TermId>,
}

pub fn encode_topics(
    store: &DocumentStore,
    topics: &[(String, String)],
    stopwords: &BTreeSet<String>,
) -> Vec<EncodedQuery> {
    topics
        .iter()
        .map(|(id, text)| EncodedQuery {
            id: id.clone(),
            terms: store.encode_query(text, stopwords),
        })
        .collect()
}

/// Rankings for every query in parallel, in input order. Queries without
/// in-vocabulary terms are left out and their ids returned separately.
pub fn rank_topics<F>(queries: &[EncodedQuery], rank: F) -> Result<(Vec<RankedList>, Vec<String>)>
where
    F: Fn(&EncodedQuery) -> nvsm_core::Result<RankedList> + Sync,
{
    let results: Vec<nvsm_core::Result<RankedList>> = queries.par_iter().map(&rank).collect();
    let mut lists = Vec::with_capacity(queries.len());
    let mut skipped = Vec::new();
    for (q, r) in queries.iter().zip(results) {
        match r {
            Ok(list) => lists.push(list),
            Err(nvsm_core::Error::QueryOutOfVocabulary) => skipped.push(q.id.clone()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((lists, skipped))
}

pub fn model_run(
    store: &DocumentStore,
    params: &ModelParameters,
    queries: &[EncodedQuery],
    depth: usize,
) -> Result<(Vec<RankedList>, Vec<String>)> {
    rank_topics(queries, |q| {
        retrieval::rank(&q.id, &q.terms, params, store, depth)
    })
}

pub fn ensemble_run(
    store: &DocumentStore,
    members: &[&ModelParameters],
    queries: &[EncodedQuery],
    depth: usize,
) -> Result<(Vec<RankedList>, Vec<String>)> {
    let ensemble = Ensemble::new(members.to_vec())?;
    rank_topics(queries, |q| {
        retrieval::ensemble_rank(&q.id, &q.terms, &ensemble, store, depth)
    })
}

pub fn lexical_run(
    model: &QueryLikelihood<'_>,
    queries: &[EncodedQuery],
    depth: usize,
) -> Result<(Vec<RankedList>, Vec<String>)> {
    rank_topics(queries, |q| model.rank(&q.id, &q.terms, depth))
}

/// Same result as the library's sequential search (strictly greater MAP
/// wins, so the earliest maximizer is kept) with grid points scored in parallel.
pub fn parallel_grid_search(
    matrix: &FeatureMatrix,
    training: &[String],
    qrels: &Qrels,
    step: f64,
) -> nvsm_core::Result<Vec<f64>> {
    let grid = weight_grid(step)?;
    let judged: Vec<String> = training
        .iter()
        .filter(|q| qrels.relevant_count(q) > 0 && matrix.query(q).is_some())
        .cloned()
        .collect();
    if judged.is_empty() {
        return Err(nvsm_core::Error::NoJudgedQuery);
    }
    let points: Vec<Vec<f64>> = grid_points(&grid, matrix.num_features()).collect();
    let maps: Vec<f64> = points
        .par_iter()
        .map(|w| training_map(matrix, &judged, qrels, w).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let mut best = None;
    for (i, &m) in maps.iter().enumerate() {
        if best.is_none_or(|(b, _)| m > b) {
            best = Some((m, i));
        }
    }
    let (_, i) = best.ok_or(nvsm_core::Error::InvalidArgument("empty weight grid"))?;
    Ok(points[i].clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// The final iteration.
    Last,
    /// The iteration with the highest validation MAP; ties keep the earliest.
    Best,
}

/// Where one width's training wrote its files.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedWidth {
    pub ngram_width: usize,
    pub checkpoints: Vec<PathBuf>,
    pub log: PathBuf,
    pub selected: PathBuf,
    pub selected_iteration: u32,
    pub mean_losses: Vec<f64>,
    pub validation_map: Vec<f64>,
}

pub fn checkpoint_path(dir: &Path, ngram_width: usize, iteration: u32) -> PathBuf {
    dir.join(format!("model-n{ngram_width}-iter{iteration:03}.nvsm"))
}

pub fn selected_path(dir: &Path, ngram_width: usize) -> PathBuf {
    dir.join(format!("model-n{ngram_width}.nvsm"))
}

/// Validation queries and judgments for best-checkpoint selection.
pub struct Validation<'a> {
    pub queries: &'a [EncodedQuery],
    pub qrels: &'a Qrels,
}

/// Trains one model, writing a checkpoint per iteration, a `iteration batch
/// loss` log and a copy of the selected checkpoint.
pub fn train_width(
    store: &DocumentStore,
    config: TrainConfig,
    dir: &Path,
    selection: Selection,
    validation: Option<&Validation<'_>>,
) -> Result<TrainedWidth> {
    let n = config.ngram_width;
    let iterations = config.iterations;
    if iterations == 0 {
        return Err(Error::Usage("training needs at least one iteration".into()));
    }
    if selection == Selection::Best && validation.is_none() {
        return Err(Error::Usage(
            "--select best needs validation topics and qrels".into(),
        ));
    }
    let mut trainer = Trainer::new(store, config)?;
    if trainer.batches_per_iteration() == 0 {
        return Err(nvsm_core::Error::NoEligibleDocument { ngram: n }.into());
    }
    let vocab_hash = container::vocabulary_hash(store.vocabulary());
    let mut log = String::new();
    let mut out = TrainedWidth {
        ngram_width: n,
        checkpoints: Vec::new(),
        log: dir.join(format!("train-n{n}.log")),
        selected: selected_path(dir, n),
        selected_iteration: 0,
        mean_losses: Vec::new(),
        validation_map: Vec::new(),
    };
    let mut best: Option<(f64, Vec<u8>, u32)> = None;
    let mut last = Vec::new();
    for _ in 0..iterations {
        let cp = trainer.run_iteration(|it, b, loss| {
            writeln!(log, "{it} {b} {loss:.9}").unwrap();
        })?;
        let bytes = container::model_container(&cp.params, vocab_hash).to_bytes();
        let path = checkpoint_path(dir, n, cp.iteration);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        out.checkpoints.push(path);
        out.mean_losses.push(cp.mean_loss.unwrap_or(f64::NAN));
        if let Some(v) = validation {
            let (lists, _) = model_run(store, &cp.params, v.queries, retrieval::DEFAULT_DEPTH)?;
            let map = MetricReport::evaluate(&lists, v.qrels).mean_average_precision();
            out.validation_map.push(map);
            if best.as_ref().is_none_or(|(b, _, _)| map > *b) {
                best = Some((map, bytes.clone(), cp.iteration));
            }
        }
        last = bytes;
        out.selected_iteration = cp.iteration;
    }
    let chosen = match (selection, best) {
        (Selection::Best, Some((_, bytes, it))) => {
            out.selected_iteration = it;
            bytes
        }
        _ => last,
    };
    std::fs::write(&out.selected, chosen).map_err(|e| Error::io(&out.selected, e))?;
    std::fs::write(&out.log, log).map_err(|e| Error::io(&out.log, e))?;
    Ok(out)
}
