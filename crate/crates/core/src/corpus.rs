//! Tokenization, vocabulary construction and the encoded document store.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::{DocId, TermId};

/// Vocabulary cap used when none is given.
pub const DEFAULT_MAX_VOCABULARY: usize = 60_000;

/// Splits `text` into lowercased alphanumeric runs and drops stopwords.
pub fn tokenize(text: &str, stopwords: &BTreeSet<String>) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        if !current.is_empty() {
            if !stopwords.contains(current.as_str()) {
                tokens.push(core::mem::take(current));
            } else {
                current.clear();
            }
        }
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            flush(&mut current);
        }
    }
    flush(&mut current);
    tokens
}

/// A raw, untokenized document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub name: String,
    pub text: String,
}

impl RawDocument {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        RawDocument {
            name: name.into(),
            text: text.into(),
        }
    }
}

/// Term ↔ id mapping with corpus frequencies.
///
/// Ids are assigned by descending collection frequency, ties broken by the
/// term's byte order, so id 0 is the most frequent term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_to_id: BTreeMap<String, TermId>,
    collection_frequency: Vec<u64>,
    document_frequency: Vec<u64>,
    max_size: usize,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent terms of `token_streams`
    /// (one stream per document).
    pub fn build<I, S, T>(
        token_streams: I,
        max_size: usize,
        stopwords: &BTreeSet<String>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        if max_size == 0 {
            return Err(Error::InvalidArgument("vocabulary size must be positive"));
        }
        let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for stream in token_streams {
            let mut local: BTreeMap<String, u64> = BTreeMap::new();
            for token in stream {
                let token = token.as_ref();
                if token.is_empty() || stopwords.contains(token) {
                    continue;
                }
                *local.entry(token.to_owned()).or_insert(0) += 1;
            }
            for (term, count) in local {
                let entry = counts.entry(term).or_insert((0, 0));
                entry.0 += count;
                entry.1 += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(String, u64, u64)> = counts
            .into_iter()
            .map(|(t, (cf, df))| (t, cf, df))
            .collect();
        // BTreeMap order already sorts terms ascending; a stable sort on
        // count keeps that as the tie-break.
        ranked.sort_by_key(|r| core::cmp::Reverse(r.1));
        ranked.truncate(max_size);
        Self::from_ranked(ranked, max_size)
    }

    /// Rebuilds a vocabulary from stored columns (term order is preserved).
    pub fn from_parts(
        terms: Vec<String>,
        collection_frequency: Vec<u64>,
        document_frequency: Vec<u64>,
        max_size: usize,
    ) -> Result<Self> {
        if terms.len() != collection_frequency.len() || terms.len() != document_frequency.len() {
            return Err(Error::ShapeMismatch("vocabulary columns differ in length"));
        }
        let ranked = terms
            .into_iter()
            .zip(collection_frequency)
            .zip(document_frequency)
            .map(|((t, cf), df)| (t, cf, df))
            .collect();
        Self::from_ranked(ranked, max_size)
    }

    fn from_ranked(ranked: Vec<(String, u64, u64)>, max_size: usize) -> Result<Self> {
        if ranked.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if ranked.len() > max_size {
            return Err(Error::InvalidArgument("vocabulary exceeds its cap"));
        }
        let mut terms = Vec::with_capacity(ranked.len());
        let mut term_to_id = BTreeMap::new();
        let mut collection_frequency = Vec::with_capacity(ranked.len());
        let mut document_frequency = Vec::with_capacity(ranked.len());
        for (i, (term, cf, df)) in ranked.into_iter().enumerate() {
            if cf < df || df == 0 {
                return Err(Error::InvalidArgument("term frequencies are inconsistent"));
            }
            if term_to_id.insert(term.clone(), i as TermId).is_some() {
                return Err(Error::InvalidArgument("vocabulary term repeated"));
            }
            terms.push(term);
            collection_frequency.push(cf);
            document_frequency.push(df);
        }
        Ok(Vocabulary {
            terms,
            term_to_id,
            collection_frequency,
            document_frequency,
            max_size,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id as usize]
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.term_to_id.get(term).copied()
    }

    pub fn collection_frequency(&self, id: TermId) -> u64 {
        self.collection_frequency[id as usize]
    }

    pub fn document_frequency(&self, id: TermId) -> u64 {
        self.document_frequency[id as usize]
    }

    pub fn collection_frequencies(&self) -> &[u64] {
        &self.collection_frequency
    }

    pub fn document_frequencies(&self) -> &[u64] {
        &self.document_frequency
    }

    /// Maps tokens to ids, silently dropping out-of-vocabulary ones.
    pub fn encode<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<TermId> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }
}

/// An encoded document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: DocId,
    pub external_name: String,
    pub tokens: Vec<TermId>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Immutable encoded collection with dense document ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentStore {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
    name_to_id: BTreeMap<String, DocId>,
    total_token_count: u64,
}

impl DocumentStore {
    /// Tokenizes `raw`, builds a vocabulary capped at `max_vocabulary` and
    /// encodes every document against it.
    pub fn ingest(
        raw: &[RawDocument],
        stopwords: &BTreeSet<String>,
        max_vocabulary: usize,
    ) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let tokenized: Vec<Vec<String>> =
            raw.iter().map(|d| tokenize(&d.text, stopwords)).collect();
        let vocabulary = Vocabulary::build(tokenized.iter(), max_vocabulary, stopwords)?;
        Self::from_tokenized(
            raw.iter().map(|d| d.name.clone()).zip(tokenized),
            vocabulary,
        )
    }

    /// Encodes raw documents against an existing vocabulary. Documents that
    /// end up empty are kept with length 0.
    pub fn encode(
        raw: &[RawDocument],
        vocabulary: Vocabulary,
        stopwords: &BTreeSet<String>,
    ) -> Result<Self> {
        Self::from_tokenized(
            raw.iter()
                .map(|d| (d.name.clone(), tokenize(&d.text, stopwords))),
            vocabulary,
        )
    }

    fn from_tokenized<I>(docs: I, vocabulary: Vocabulary) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let docs = docs
            .into_iter()
            .map(|(name, tokens)| {
                let ids = vocabulary.encode(&tokens);
                (name, ids)
            })
            .collect::<Vec<_>>();
        Self::from_parts(vocabulary, docs)
    }

    /// Assembles a store from already-encoded `(name, token ids)` pairs in
    /// doc-id order.
    pub fn from_parts(vocabulary: Vocabulary, docs: Vec<(String, Vec<TermId>)>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let vocab_len = vocabulary.len() as TermId;
        let mut name_to_id = BTreeMap::new();
        let mut documents = Vec::with_capacity(docs.len());
        let mut total_token_count = 0u64;
        for (i, (name, tokens)) in docs.into_iter().enumerate() {
            if tokens.iter().any(|&t| t >= vocab_len) {
                return Err(Error::InvalidArgument("token id outside the vocabulary"));
            }
            if name_to_id.insert(name.clone(), i as DocId).is_some() {
                return Err(Error::DuplicateDocument(name));
            }
            total_token_count += tokens.len() as u64;
            documents.push(Document {
                doc_id: i as DocId,
                external_name: name,
                tokens,
            });
        }
        Ok(DocumentStore {
            documents,
            vocabulary,
            name_to_id,
            total_token_count,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: DocId) -> &Document {
        &self.documents[id as usize]
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn total_token_count(&self) -> u64 {
        self.total_token_count
    }

    pub fn doc_id(&self, name: &str) -> Option<DocId> {
        self.name_to_id.get(name).copied()
    }

    pub fn name(&self, id: DocId) -> &str {
        &self.documents[id as usize].external_name
    }

    /// Tokenizes a free-text query and keeps its in-vocabulary terms.
    pub fn encode_query(&self, text: &str, stopwords: &BTreeSet<String>) -> Vec<TermId> {
        self.vocabulary.encode(&tokenize(text, stopwords))
    }
}
