//! Query-likelihood language model with Dirichlet or Jelinek-Mercer
//! smoothing.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::DocumentStore;
use crate::error::{Error, Result};
use crate::retrieval::RankedList;
use crate::{DocId, TermId};

/// Dirichlet prior grid.
pub const DIRICHLET_GRID: [f64; 9] = [
    125.0, 250.0, 500.0, 750.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0,
];

/// Jelinek-Mercer grid `{k/20 : 1 ≤ k ≤ 20}`.
pub fn jelinek_mercer_grid() -> impl Iterator<Item = f64> {
    (1..=20).map(|k| k as f64 / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// `p = (tf + μ·p(w|C)) / (|d| + μ)`
    Dirichlet { mu: f64 },
    /// `p = λ·tf/|d| + (1 − λ)·p(w|C)`
    JelinekMercer { lambda: f64 },
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Smoothing::Dirichlet { mu } if !(mu > 0.0 && mu.is_finite()) => {
                Err(Error::InvalidArgument("dirichlet mu must be positive"))
            }
            Smoothing::JelinekMercer { lambda } if !(lambda > 0.0 && lambda <= 1.0) => Err(
                Error::InvalidArgument("jelinek-mercer lambda must lie in (0, 1]"),
            ),
            _ => Ok(()),
        }
    }

    /// Smoothed `p(w|d)` from term frequency, document length and
    /// collection probability.
    pub fn probability(&self, tf: u64, doc_len: u64, collection_prob: f64) -> f64 {
        let tf = tf as f64;
        let len = doc_len as f64;
        match *self {
            Smoothing::Dirichlet { mu } => (tf + mu * collection_prob) / (len + mu),
            Smoothing::JelinekMercer { lambda } => {
                lambda * (tf / len) + (1.0 - lambda) * collection_prob
            }
        }
    }
}

/// Per-term postings `(doc, tf)` sorted by doc id.
#[derive(Debug, Clone)]
pub struct TermIndex {
    postings: Vec<Vec<(DocId, u32)>>,
}

impl TermIndex {
    pub fn build(store: &DocumentStore) -> Self {
        let mut postings: Vec<Vec<(DocId, u32)>> =
            (0..store.vocabulary().len()).map(|_| Vec::new()).collect();
        for doc in store.documents() {
            let mut tokens = doc.tokens.clone();
            tokens.sort_unstable();
            let mut i = 0;
            while i < tokens.len() {
                let term = tokens[i];
                let start = i;
                while i < tokens.len() && tokens[i] == term {
                    i += 1;
                }
                postings[term as usize].push((doc.doc_id, (i - start) as u32));
            }
        }
        TermIndex { postings }
    }

    pub fn term_frequency(&self, term: TermId, doc: DocId) -> u32 {
        let list = &self.postings[term as usize];
        match list.binary_search_by_key(&doc, |&(d, _)| d) {
            Ok(i) => list[i].1,
            Err(_) => 0,
        }
    }

    pub fn postings(&self, term: TermId) -> &[(DocId, u32)] {
        &self.postings[term as usize]
    }
}

/// Query-likelihood scorer over one store.
#[derive(Debug, Clone)]
pub struct QueryLikelihood<'a> {
    store: &'a DocumentStore,
    index: TermIndex,
    smoothing: Smoothing,
}

impl<'a> QueryLikelihood<'a> {
    pub fn new(store: &'a DocumentStore, smoothing: Smoothing) -> Result<Self> {
        smoothing.validate()?;
        Ok(QueryLikelihood {
            store,
            index: TermIndex::build(store),
            smoothing,
        })
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    /// `CF_w / total_token_count`.
    pub fn collection_probability(&self, term: TermId) -> f64 {
        self.store.vocabulary().collection_frequency(term) as f64
            / self.store.total_token_count() as f64
    }

    /// Smoothed `p(w|d)`.
    pub fn term_probability(&self, term: TermId, doc: DocId) -> f64 {
        let tf = self.index.term_frequency(term, doc);
        let len = self.store.document(doc).len();
        self.smoothing
            .probability(u64::from(tf), len as u64, self.collection_probability(term))
    }

    /// `Σ_w log p(w|d)` over the (in-vocabulary) query terms.
    pub fn log_score(&self, query: &[TermId], doc: DocId) -> Result<f64> {
        if query.is_empty() {
            return Err(Error::QueryOutOfVocabulary);
        }
        if self.store.document(doc).is_empty() {
            return Err(Error::EmptyDocument(self.store.name(doc).into()));
        }
        Ok(query
            .iter()
            .map(|&w| libm::log(self.term_probability(w, doc)))
            .sum())
    }

    /// Exhaustive ranking of every non-empty document.
    pub fn rank(&self, query_id: &str, query: &[TermId], depth: usize) -> Result<RankedList> {
        if query.is_empty() {
            return Err(Error::QueryOutOfVocabulary);
        }
        let mut scored = Vec::with_capacity(self.store.len());
        for doc in self.store.documents().iter().filter(|d| !d.is_empty()) {
            scored.push((
                String::from(doc.external_name.as_str()),
                self.log_score(query, doc.doc_id)?,
            ));
        }
        Ok(RankedList::from_scores(query_id, scored, depth))
    }
}
