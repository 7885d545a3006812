//! Neural vector space model core.
//!
//! Learns word and document representations from an unlabeled collection,
//! ranks documents by cosine similarity in the learned document space, and
//! provides the lexical baseline, score fusion and evaluation machinery that
//! go with it. Everything here is pure computation over in-memory data; file
//! formats, statistics with p-values and the command line live in the `nvsm`
//! crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod lexical;
pub mod linalg;
pub mod model;
pub mod retrieval;
pub mod sampler;
pub mod trainer;

pub use corpus::{DocumentStore, Vocabulary};
pub use error::{Error, Result};
pub use model::ModelParameters;
pub use retrieval::RankedList;
pub use trainer::TrainConfig;

/// Integer id of a vocabulary term.
pub type TermId = u32;
/// Dense integer id of a document, `0..num_documents`.
pub type DocId = u32;
