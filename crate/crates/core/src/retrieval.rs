//! Cosine ranking with a single model, and the unsupervised ensemble of
//! models trained with different n-gram widths.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::DocumentStore;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, ModelParameters};
use crate::{DocId, TermId};

/// Default ranking depth and the number of top documents used for
/// ensemble statistics.
pub const DEFAULT_DEPTH: usize = 1000;

/// n-gram widths of the default ensemble.
pub const DEFAULT_ENSEMBLE_WIDTHS: [usize; 8] = [2, 4, 8, 10, 12, 16, 24, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc: String,
    pub score: f64,
    /// 1-based.
    pub rank: u32,
}

/// A ranking for one query, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

/// Descending score, then ascending name.
pub fn by_score_then_name(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

impl RankedList {
    /// Sorts `(doc, score)` pairs by descending score (ties by ascending
    /// name) and keeps the first `depth`.
    pub fn from_scores(
        query_id: impl Into<String>,
        mut scored: Vec<(String, f64)>,
        depth: usize,
    ) -> Self {
        scored.sort_by(|a, b| by_score_then_name((&a.0, a.1), (&b.0, b.1)));
        scored.truncate(depth);
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc, score))| RankedEntry {
                doc,
                score,
                rank: i as u32 + 1,
            })
            .collect();
        RankedList {
            query_id: query_id.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn docs(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc.as_str())
    }

    /// Checks ranks are dense from 1, scores non-increasing and documents
    /// unique.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.entries.iter().enumerate().all(|(i, e)| {
            e.rank == i as u32 + 1
                && seen.insert(e.doc.as_str())
                && (i == 0 || self.entries[i - 1].score >= e.score)
        })
    }
}

/// Cosine similarity between the query projection and one document vector.
pub fn score(query: &[TermId], doc: DocId, params: &ModelParameters) -> Result<f64> {
    let projection = model::project_query_ids(query, params)?;
    score_projection(&projection, doc, params)
}

fn score_projection(projection: &[f64], doc: DocId, params: &ModelParameters) -> Result<f64> {
    let vector = params.doc.row(doc as usize);
    if linalg::norm(projection) == 0.0 {
        return Err(Error::ZeroVector);
    }
    linalg::cosine(projection, vector).ok_or_else(|| Error::ZeroDocumentVector(format!("{doc}")))
}

/// Cosine score of every document, indexed by doc id.
pub fn score_all(
    query: &[TermId],
    params: &ModelParameters,
    store: &DocumentStore,
) -> Result<Vec<f64>> {
    if params.num_documents() != store.len() {
        return Err(Error::ShapeMismatch(
            "model and store disagree on document count",
        ));
    }
    let projection = model::project_query_ids(query, params)?;
    (0..store.len() as DocId)
        .map(|d| {
            score_projection(&projection, d, params).map_err(|e| match e {
                Error::ZeroDocumentVector(_) => Error::ZeroDocumentVector(store.name(d).into()),
                other => other,
            })
        })
        .collect()
}

fn ranked_from_all(
    query_id: &str,
    scores: &[f64],
    store: &DocumentStore,
    depth: usize,
) -> RankedList {
    let scored = scores
        .iter()
        .enumerate()
        .map(|(d, &s)| (String::from(store.name(d as DocId)), s))
        .collect();
    RankedList::from_scores(query_id, scored, depth)
}

/// Exhaustive cosine ranking of the whole store.
pub fn rank(
    query_id: &str,
    query: &[TermId],
    params: &ModelParameters,
    store: &DocumentStore,
    depth: usize,
) -> Result<RankedList> {
    let scores = score_all(query, params, store)?;
    Ok(ranked_from_all(query_id, &scores, store, depth))
}

/// Indices of the `depth` best scores under the ranking order.
fn top_indices(scores: &[f64], names: &[&str], depth: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| by_score_then_name((names[a], scores[a]), (names[b], scores[b])));
    idx.truncate(depth);
    idx
}

/// Sample mean and unbiased standard deviation of the `depth` best scores.
pub fn top_statistics(scores: &[f64], names: &[&str], depth: usize) -> Option<(f64, f64)> {
    let top = top_indices(scores, names, depth);
    if top.len() < 2 {
        return None;
    }
    let n = top.len() as f64;
    let mean = top.iter().map(|&i| scores[i]).sum::<f64>() / n;
    let var = top
        .iter()
        .map(|&i| (scores[i] - mean) * (scores[i] - mean))
        .sum::<f64>()
        / (n - 1.0);
    Some((mean, libm::sqrt(var)))
}

/// Sums per-member standardized scores over the union of the members' top
/// `depth` documents.
///
/// `member_scores[k][d]` is member `k`'s score for document `d`; every
/// member must score every document. Each member is standardized with the
/// mean and deviation of its own top `depth` scores. Returns `(doc, sum)`
/// for the candidates, in doc order.
pub fn standardized_sum(
    query_id: &str,
    member_scores: &[Vec<f64>],
    names: &[&str],
    depth: usize,
) -> Result<Vec<(usize, f64)>> {
    if member_scores.is_empty() {
        return Err(Error::InvalidArgument("ensemble needs at least one member"));
    }
    let n_docs = member_scores[0].len();
    if member_scores.iter().any(|s| s.len() != n_docs) || names.len() != n_docs {
        return Err(Error::ShapeMismatch(
            "ensemble members score different document sets",
        ));
    }
    let mut candidates = BTreeSet::new();
    let mut stats = Vec::with_capacity(member_scores.len());
    for (k, scores) in member_scores.iter().enumerate() {
        candidates.extend(top_indices(scores, names, depth));
        match top_statistics(scores, names, depth) {
            Some((mean, sd)) if sd > 0.0 && sd.is_finite() => stats.push((mean, sd)),
            _ => {
                return Err(Error::DegenerateDeviation {
                    member: k,
                    query: query_id.into(),
                })
            }
        }
    }
    Ok(candidates
        .into_iter()
        .map(|d| {
            let total = member_scores
                .iter()
                .zip(&stats)
                .map(|(scores, (mean, sd))| (scores[d] - mean) / sd)
                .sum();
            (d, total)
        })
        .collect())
}

/// Models trained with different n-gram widths over the same store.
#[derive(Debug, Clone)]
pub struct Ensemble<'a> {
    members: Vec<&'a ModelParameters>,
    depth: usize,
}

impl<'a> Ensemble<'a> {
    pub fn new(members: Vec<&'a ModelParameters>) -> Result<Self> {
        Self::with_depth(members, DEFAULT_DEPTH)
    }

    pub fn with_depth(members: Vec<&'a ModelParameters>, depth: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one member"));
        }
        if depth == 0 {
            return Err(Error::InvalidArgument("ensemble depth must be positive"));
        }
        Ok(Ensemble { members, depth })
    }

    pub fn members(&self) -> &[&'a ModelParameters] {
        &self.members
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Ranks by the sum of member scores standardized per query.
pub fn ensemble_rank(
    query_id: &str,
    query: &[TermId],
    ensemble: &Ensemble<'_>,
    store: &DocumentStore,
    depth: usize,
) -> Result<RankedList> {
    let member_scores = ensemble
        .members
        .iter()
        .map(|p| score_all(query, p, store))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = store
        .documents()
        .iter()
        .map(|d| d.external_name.as_str())
        .collect();
    let summed = standardized_sum(query_id, &member_scores, &names, ensemble.depth)?;
    let scored = summed
        .into_iter()
        .map(|(d, s)| (String::from(store.name(d as DocId)), s))
        .collect();
    Ok(RankedList::from_scores(query_id, scored, depth))
}
