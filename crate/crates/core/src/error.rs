use alloc::string::String;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("corpus contains no usable tokens")]
    EmptyCorpus,
    #[error("duplicate document name `{0}`")]
    DuplicateDocument(String),
    #[error("no document has at least {ngram} tokens")]
    NoEligibleDocument { ngram: usize },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("n-gram is empty")]
    EmptyNgram,
    #[error("no query term is in the vocabulary")]
    QueryOutOfVocabulary,
    #[error("document {0} has no tokens")]
    EmptyDocument(String),
    #[error("document vector for `{0}` is zero")]
    ZeroDocumentVector(String),
    #[error("ensemble member {member} has constant top scores for query `{query}`")]
    DegenerateDeviation { member: usize, query: String },
    #[error("no training query has a relevant document")]
    NoJudgedQuery,
    #[error("need at least {needed} judged queries, found {found}")]
    InsufficientQueries { needed: usize, found: usize },
    #[error("query `{0}` has no relevant document")]
    NoRelevantDocument(String),
    #[error("vocabulary has {0} terms, need at least 4")]
    VocabularyTooSmall(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
