//! Linear fusion of ranker features with per-query min-max normalization,
//! exhaustive weight grid search and k-fold cross-validation over queries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocumentStore;
use crate::error::{Error, Result};
use crate::eval::{self, Qrels};
use crate::lexical::QueryLikelihood;
use crate::model::ModelParameters;
use crate::retrieval::{self, RankedList};
use crate::{DocId, TermId};

pub const DEFAULT_STEP: f64 = 0.0125;
pub const DEFAULT_FOLDS: usize = 20;
pub const POOL_DEPTH: usize = 1000;

/// A ranker that can take part in fusion.
pub trait Feature {
    fn name(&self) -> &str;

    /// The feature's own best `depth` documents for the query. An unknown
    /// query yields an empty list.
    fn top(&self, query_id: &str, depth: usize) -> Result<Vec<(String, f64)>>;

    /// Scores for `docs`; `None` marks a value the feature cannot provide,
    /// which is then filled with the feature's per-query minimum.
    fn scores(&self, query_id: &str, docs: &[String]) -> Result<Vec<Option<f64>>>;
}

/// A ranking read from a run file. Documents it did not retrieve are missing.
#[derive(Debug, Clone)]
pub struct RunFeature {
    name: String,
    runs: BTreeMap<String, RankedList>,
}

impl RunFeature {
    pub fn new(name: impl Into<String>, runs: Vec<RankedList>) -> Self {
        RunFeature {
            name: name.into(),
            runs: runs.into_iter().map(|l| (l.query_id.clone(), l)).collect(),
        }
    }
}

impl Feature for RunFeature {
    fn name(&self) -> &str {
        &self.name
    }

    fn top(&self, query_id: &str, depth: usize) -> Result<Vec<(String, f64)>> {
        Ok(self
            .runs
            .get(query_id)
            .map(|l| {
                l.entries
                    .iter()
                    .take(depth)
                    .map(|e| (e.doc.clone(), e.score))
                    .collect()
            })
            .unwrap_or_default())
    }

    fn scores(&self, query_id: &str, docs: &[String]) -> Result<Vec<Option<f64>>> {
        let Some(list) = self.runs.get(query_id) else {
            return Ok(vec![None; docs.len()]);
        };
        let by_doc: BTreeMap<&str, f64> = list
            .entries
            .iter()
            .map(|e| (e.doc.as_str(), e.score))
            .collect();
        Ok(docs
            .iter()
            .map(|d| by_doc.get(d.as_str()).copied())
            .collect())
    }
}

/// Parsed queries shared by the computed features.
pub type QueryTerms = BTreeMap<String, Vec<TermId>>;

fn lookup_docs(
    store: &DocumentStore,
    docs: &[String],
    values: impl Fn(DocId) -> Result<Option<f64>>,
) -> Result<Vec<Option<f64>>> {
    docs.iter()
        .map(|d| match store.doc_id(d) {
            Some(id) => values(id),
            None => Ok(None),
        })
        .collect()
}

/// Cosine scores of a trained model.
#[derive(Debug, Clone)]
pub struct ModelFeature<'a> {
    name: String,
    params: &'a ModelParameters,
    store: &'a DocumentStore,
    queries: &'a QueryTerms,
}

impl<'a> ModelFeature<'a> {
    pub fn new(
        name: impl Into<String>,
        params: &'a ModelParameters,
        store: &'a DocumentStore,
        queries: &'a QueryTerms,
    ) -> Self {
        ModelFeature {
            name: name.into(),
            params,
            store,
            queries,
        }
    }
}

impl Feature for ModelFeature<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn top(&self, query_id: &str, depth: usize) -> Result<Vec<(String, f64)>> {
        let Some(terms) = self.queries.get(query_id) else {
            return Ok(Vec::new());
        };
        let list = retrieval::rank(query_id, terms, self.params, self.store, depth)?;
        Ok(list.entries.into_iter().map(|e| (e.doc, e.score)).collect())
    }

    fn scores(&self, query_id: &str, docs: &[String]) -> Result<Vec<Option<f64>>> {
        let Some(terms) = self.queries.get(query_id) else {
            return Ok(vec![None; docs.len()]);
        };
        let all = retrieval::score_all(terms, self.params, self.store)?;
        lookup_docs(self.store, docs, |d| Ok(Some(all[d as usize])))
    }
}

/// Query-likelihood log-probabilities.
#[derive(Debug, Clone)]
pub struct LexicalFeature<'a> {
    name: String,
    model: &'a QueryLikelihood<'a>,
    store: &'a DocumentStore,
    queries: &'a QueryTerms,
}

impl<'a> LexicalFeature<'a> {
    pub fn new(
        name: impl Into<String>,
        model: &'a QueryLikelihood<'a>,
        store: &'a DocumentStore,
        queries: &'a QueryTerms,
    ) -> Self {
        LexicalFeature {
            name: name.into(),
            model,
            store,
            queries,
        }
    }
}

impl Feature for LexicalFeature<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn top(&self, query_id: &str, depth: usize) -> Result<Vec<(String, f64)>> {
        let Some(terms) = self.queries.get(query_id) else {
            return Ok(Vec::new());
        };
        let list = self.model.rank(query_id, terms, depth)?;
        Ok(list.entries.into_iter().map(|e| (e.doc, e.score)).collect())
    }

    fn scores(&self, query_id: &str, docs: &[String]) -> Result<Vec<Option<f64>>> {
        let Some(terms) = self.queries.get(query_id) else {
            return Ok(vec![None; docs.len()]);
        };
        lookup_docs(self.store, docs, |d| {
            if self.store.document(d).is_empty() {
                Ok(None)
            } else {
                self.model.log_score(terms, d).map(Some)
            }
        })
    }
}

/// Min-max scaling to `[0, 1]`; a constant column maps to all zeros.
pub fn normalize_per_query(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if range <= 0.0 || !range.is_finite() {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

/// Pooled candidates and normalized feature values for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryFeatures {
    pub query_id: String,
    pub candidates: Vec<String>,
    /// `values[feature][candidate]`, each in `[0, 1]`.
    pub values: Vec<Vec<f64>>,
}

impl QueryFeatures {
    /// Fused ranking of the candidates under `weights`, cut at `depth`.
    pub fn fuse(&self, weights: &[f64], depth: usize) -> RankedList {
        let scored = self
            .candidates
            .iter()
            .enumerate()
            .map(|(c, doc)| {
                let s = weights
                    .iter()
                    .zip(&self.values)
                    .map(|(w, col)| w * col[c])
                    .sum();
                (doc.clone(), s)
            })
            .collect();
        RankedList::from_scores(self.query_id.as_str(), scored, depth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub queries: Vec<QueryFeatures>,
}

impl FeatureMatrix {
    /// Pools each feature's top `depth` per query, fills missing values with
    /// the feature's per-query minimum, and normalizes per query.
    pub fn build(features: &[&dyn Feature], query_ids: &[String], depth: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidArgument("fusion needs at least one feature"));
        }
        let mut queries = Vec::with_capacity(query_ids.len());
        for qid in query_ids {
            let mut pool = BTreeSet::new();
            for f in features {
                pool.extend(f.top(qid, depth)?.into_iter().map(|(d, _)| d));
            }
            let candidates: Vec<String> = pool.into_iter().collect();
            let mut values = Vec::with_capacity(features.len());
            for f in features {
                let raw = f.scores(qid, &candidates)?;
                let floor = raw.iter().flatten().copied().fold(f64::INFINITY, f64::min);
                let floor = if floor.is_finite() { floor } else { 0.0 };
                let filled: Vec<f64> = raw.into_iter().map(|v| v.unwrap_or(floor)).collect();
                values.push(normalize_per_query(&filled));
            }
            queries.push(QueryFeatures {
                query_id: qid.clone(),
                candidates,
                values,
            });
        }
        Ok(FeatureMatrix {
            feature_names: features.iter().map(|f| String::from(f.name())).collect(),
            queries,
        })
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn query(&self, query_id: &str) -> Option<&QueryFeatures> {
        self.queries.iter().find(|q| q.query_id == query_id)
    }
}

/// Grid `{0, step, …, 1}` as exact multiples of `1/steps`.
pub fn weight_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument("grid step must lie in (0, 1]"));
    }
    let steps = libm::round(1.0 / step);
    if (steps * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("grid step must divide 1"));
    }
    let steps = steps as usize;
    Ok((0..=steps).map(|k| k as f64 / steps as f64).collect())
}

/// Every weight vector over `grid` in lexicographic order (first feature
/// most significant), skipping the all-zero vector.
pub fn grid_points(grid: &[f64], num_features: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let total = grid
        .len()
        .checked_pow(num_features as u32)
        .unwrap_or(usize::MAX);
    (1..total).map(move |mut code| {
        let mut w = vec![0.0; num_features];
        for slot in w.iter_mut().rev() {
            *slot = grid[code % grid.len()];
            code /= grid.len();
        }
        w
    })
}

/// MAP@1000 of the fused ranking over the judged queries among `query_ids`.
/// Returns `None` when none of them is judged.
pub fn training_map(
    matrix: &FeatureMatrix,
    query_ids: &[String],
    qrels: &Qrels,
    weights: &[f64],
) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for qid in query_ids {
        if qrels.relevant_count(qid) == 0 {
            continue;
        }
        let Some(q) = matrix.query(qid) else { continue };
        let list = q.fuse(weights, eval::MAP_DEPTH);
        sum += eval::average_precision(&list, qrels, eval::MAP_DEPTH).ok()?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn judged_in_matrix<'a>(
    matrix: &FeatureMatrix,
    query_ids: &'a [String],
    qrels: &Qrels,
) -> Vec<&'a String> {
    query_ids
        .iter()
        .filter(|q| qrels.relevant_count(q) > 0 && matrix.query(q).is_some())
        .collect()
}

/// Exhaustive sweep returning the weights with the highest training MAP;
/// ties go to the earliest grid point.
pub fn grid_search_weights(
    matrix: &FeatureMatrix,
    training: &[String],
    qrels: &Qrels,
    step: f64,
) -> Result<Vec<f64>> {
    let grid = weight_grid(step)?;
    let judged: Vec<String> = judged_in_matrix(matrix, training, qrels)
        .into_iter()
        .cloned()
        .collect();
    if judged.is_empty() {
        return Err(Error::NoJudgedQuery);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for w in grid_points(&grid, matrix.num_features()) {
        let map = training_map(matrix, &judged, qrels, &w).ok_or(Error::NoJudgedQuery)?;
        if best.as_ref().is_none_or(|(b, _)| map > *b) {
            best = Some((map, w));
        }
    }
    best.map(|(_, w)| w)
        .ok_or(Error::InvalidArgument("empty weight grid"))
}

/// Shuffled, contiguous, near-equal query folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Vec<String>>,
    pub seed: u64,
}

impl FoldPlan {
    /// Sorts the ids, shuffles with `seed` and splits into `num_folds`
    /// contiguous folds whose sizes differ by at most one.
    pub fn new(query_ids: &[String], num_folds: usize, seed: u64) -> Result<Self> {
        if num_folds < 2 {
            return Err(Error::InvalidArgument(
                "cross-validation needs at least two folds",
            ));
        }
        let mut ids: Vec<String> = query_ids
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if ids.len() < num_folds {
            return Err(Error::InsufficientQueries {
                needed: num_folds,
                found: ids.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ids.shuffle(&mut rng);
        let base = ids.len() / num_folds;
        let extra = ids.len() % num_folds;
        let mut folds = Vec::with_capacity(num_folds);
        let mut rest = ids.into_iter();
        for k in 0..num_folds {
            let size = base + usize::from(k < extra);
            folds.push(rest.by_ref().take(size).collect());
        }
        Ok(FoldPlan { folds, seed })
    }

    pub fn num_folds(&self) -> usize {
        self.folds.len()
    }

    /// `(training, test)` ids for fold `k`.
    pub fn split(&self, k: usize) -> (Vec<String>, &[String]) {
        let training = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        (training, &self.folds[k])
    }
}

/// Weights chosen for one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub test_queries: Vec<String>,
    pub weights: Vec<f64>,
}

/// Fits weights on each fold's training queries and ranks its test queries.
/// Returns the fused rankings sorted by query id, plus the per-fold weights.
pub fn cross_validated_fusion(
    matrix: &FeatureMatrix,
    qrels: &Qrels,
    plan: &FoldPlan,
    step: f64,
) -> Result<(Vec<RankedList>, Vec<FoldResult>)> {
    cross_validated_fusion_with(matrix, qrels, plan, step, &grid_search_weights)
}

/// [`cross_validated_fusion`] with a caller-supplied weight search.
/// A weight search over `(matrix, training queries, qrels, step)`.
pub type WeightSearch = dyn Fn(&FeatureMatrix, &[String], &Qrels, f64) -> Result<Vec<f64>>;

pub fn cross_validated_fusion_with(
    matrix: &FeatureMatrix,
    qrels: &Qrels,
    plan: &FoldPlan,
    step: f64,
    search: &WeightSearch,
) -> Result<(Vec<RankedList>, Vec<FoldResult>)> {
    let all: Vec<String> = plan.folds.iter().flatten().cloned().collect();
    let judged = judged_in_matrix(matrix, &all, qrels).len();
    if judged < plan.num_folds() {
        return Err(Error::InsufficientQueries {
            needed: plan.num_folds(),
            found: judged,
        });
    }
    let mut lists = Vec::new();
    let mut results = Vec::with_capacity(plan.num_folds());
    for k in 0..plan.num_folds() {
        let (training, test) = plan.split(k);
        let weights = search(matrix, &training, qrels, step)?;
        for qid in test {
            if let Some(q) = matrix.query(qid) {
                lists.push(q.fuse(&weights, POOL_DEPTH));
            }
        }
        results.push(FoldResult {
            test_queries: test.to_vec(),
            weights,
        });
    }
    lists.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    Ok((lists, results))
}
