//! Relevance judgments, ranking metrics, query/document overlap and the
//! frequency partition used for the word-norm analysis.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{DocumentStore, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelParameters;
use crate::retrieval::RankedList;
use crate::TermId;

pub const MAP_DEPTH: usize = 1000;
pub const NDCG_DEPTH: usize = 100;
pub const PRECISION_DEPTH: usize = 10;

/// Graded judgments keyed by query id then document name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, doc: impl Into<String>, grade: u32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc.into(), grade);
    }

    pub fn grade(&self, query_id: &str, doc: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|q| q.get(doc))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_relevant(&self, query_id: &str, doc: &str) -> bool {
        self.grade(query_id, doc) > 0
    }

    pub fn relevant_count(&self, query_id: &str) -> usize {
        self.judgments
            .get(query_id)
            .map_or(0, |q| q.values().filter(|&&g| g > 0).count())
    }

    /// Documents judged relevant for `query_id`.
    pub fn relevant(&self, query_id: &str) -> impl Iterator<Item = (&str, u32)> {
        self.judgments
            .get(query_id)
            .into_iter()
            .flat_map(|q| q.iter())
            .filter(|(_, &g)| g > 0)
            .map(|(d, &g)| (d.as_str(), g))
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// All judgments as `(query, doc, grade)` in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.judgments
            .iter()
            .flat_map(|(q, docs)| docs.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g)))
    }
}

fn require_relevant(qrels: &Qrels, query_id: &str) -> Result<usize> {
    match qrels.relevant_count(query_id) {
        0 => Err(Error::NoRelevantDocument(query_id.into())),
        r => Ok(r),
    }
}

/// Average precision of `list` cut at `depth`.
pub fn average_precision(list: &RankedList, qrels: &Qrels, depth: usize) -> Result<f64> {
    let total_relevant = require_relevant(qrels, &list.query_id)?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in list.docs().take(depth).enumerate() {
        if qrels.is_relevant(&list.query_id, doc) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / total_relevant as f64)
}

/// NDCG at `depth` with raw grades as gains and a `log2(i + 1)` discount.
pub fn ndcg(list: &RankedList, qrels: &Qrels, depth: usize) -> Result<f64> {
    require_relevant(qrels, &list.query_id)?;
    let dcg: f64 = list
        .docs()
        .take(depth)
        .enumerate()
        .map(|(i, d)| f64::from(qrels.grade(&list.query_id, d)) / libm::log2(i as f64 + 2.0))
        .sum();
    let mut ideal: Vec<u32> = qrels.relevant(&list.query_id).map(|(_, g)| g).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(depth)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / libm::log2(i as f64 + 2.0))
        .sum();
    Ok(dcg / idcg)
}

/// Relevant documents among the first `k`, over `k`.
pub fn precision_at(list: &RankedList, qrels: &Qrels, k: usize) -> f64 {
    let hits = list
        .docs()
        .take(k)
        .filter(|d| qrels.is_relevant(&list.query_id, d))
        .count();
    hits as f64 / k as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    pub average_precision: f64,
    pub ndcg: f64,
    pub precision: f64,
}

/// Per-query and mean MAP@1000, NDCG@100 and P@10.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub queries: Vec<QueryMetrics>,
}

impl MetricReport {
    /// Evaluates every ranked list whose query has at least one relevant
    /// judgment; the others are skipped.
    pub fn evaluate(runs: &[RankedList], qrels: &Qrels) -> Self {
        let mut queries: Vec<QueryMetrics> = runs
            .iter()
            .filter(|l| qrels.relevant_count(&l.query_id) > 0)
            .map(|l| QueryMetrics {
                query_id: l.query_id.clone(),
                average_precision: average_precision(l, qrels, MAP_DEPTH).expect("judged query"),
                ndcg: ndcg(l, qrels, NDCG_DEPTH).expect("judged query"),
                precision: precision_at(l, qrels, PRECISION_DEPTH),
            })
            .collect();
        queries.sort_by(|a, b| a.query_id.cmp(&b.query_id));
        MetricReport { queries }
    }

    fn mean(&self, f: impl Fn(&QueryMetrics) -> f64) -> f64 {
        if self.queries.is_empty() {
            return 0.0;
        }
        self.queries.iter().map(f).sum::<f64>() / self.queries.len() as f64
    }

    pub fn mean_average_precision(&self) -> f64 {
        self.mean(|q| q.average_precision)
    }

    pub fn mean_ndcg(&self) -> f64 {
        self.mean(|q| q.ndcg)
    }

    pub fn mean_precision(&self) -> f64 {
        self.mean(|q| q.precision)
    }
}

/// Mean over relevant documents of the fraction of distinct query terms the
/// document contains.
pub fn titlestat_rel(
    query_id: &str,
    query: &[TermId],
    qrels: &Qrels,
    store: &DocumentStore,
) -> Result<f64> {
    let terms: BTreeSet<TermId> = query.iter().copied().collect();
    if terms.is_empty() {
        return Err(Error::QueryOutOfVocabulary);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (name, _) in qrels.relevant(query_id) {
        let Some(id) = store.doc_id(name) else {
            continue;
        };
        let doc_terms: BTreeSet<TermId> = store.document(id).tokens.iter().copied().collect();
        let overlap = terms.iter().filter(|t| doc_terms.contains(t)).count();
        total += overlap as f64 / terms.len() as f64;
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoRelevantDocument(query_id.into()));
    }
    Ok(total / count as f64)
}

/// Terms split by collection-frequency rank: the most frequent quarter, the
/// middle half and the least frequent quarter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyPartition {
    pub top: Vec<TermId>,
    pub middle: Vec<TermId>,
    pub bottom: Vec<TermId>,
}

/// Ranks terms by descending collection frequency (ties by ascending term)
/// and cuts at the quartiles; `|V| = 8` gives 2/4/2.
pub fn frequency_partition(vocabulary: &Vocabulary) -> Result<FrequencyPartition> {
    let n = vocabulary.len();
    if n < 4 {
        return Err(Error::VocabularyTooSmall(n));
    }
    let mut order: Vec<TermId> = (0..n as TermId).collect();
    order.sort_by(|&a, &b| {
        vocabulary
            .collection_frequency(b)
            .cmp(&vocabulary.collection_frequency(a))
            .then_with(|| vocabulary.term(a).cmp(vocabulary.term(b)))
    });
    let quarter = n / 4;
    let bottom = order.split_off(n - quarter);
    let middle = order.split_off(quarter);
    Ok(FrequencyPartition {
        top: order,
        middle,
        bottom,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermNorm {
    pub term: String,
    pub collection_frequency: u64,
    pub norm: f64,
}

/// `(term, CF_w, ‖R_V^(w)‖)` for every vocabulary term, in id order.
pub fn word_norm_table(params: &ModelParameters, vocabulary: &Vocabulary) -> Result<Vec<TermNorm>> {
    if params.vocabulary_size() != vocabulary.len() {
        return Err(Error::ShapeMismatch(
            "model and vocabulary disagree on size",
        ));
    }
    Ok((0..vocabulary.len() as TermId)
        .map(|t| TermNorm {
            term: vocabulary.term(t).into(),
            collection_frequency: vocabulary.collection_frequency(t),
            norm: linalg::norm(params.word.row(t as usize)),
        })
        .collect())
}
