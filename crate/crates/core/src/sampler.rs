//! Mini-batch construction: n-gram/document pairs and uniform negatives.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocumentStore;
use crate::error::{Error, Result};
use crate::{DocId, TermId};

/// `m` n-gram/document pairs stored as a flat `m × n` token matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    ngram_width: usize,
    ngram_tokens: Vec<TermId>,
    source_docs: Vec<DocId>,
}

impl Batch {
    pub fn new(
        ngram_width: usize,
        ngram_tokens: Vec<TermId>,
        source_docs: Vec<DocId>,
    ) -> Result<Self> {
        if ngram_width == 0 || ngram_tokens.len() != ngram_width * source_docs.len() {
            return Err(Error::ShapeMismatch("batch tokens must be m × n"));
        }
        Ok(Batch {
            ngram_width,
            ngram_tokens,
            source_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.source_docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_docs.is_empty()
    }

    pub fn ngram_width(&self) -> usize {
        self.ngram_width
    }

    pub fn ngram(&self, i: usize) -> &[TermId] {
        &self.ngram_tokens[i * self.ngram_width..(i + 1) * self.ngram_width]
    }

    pub fn source_doc(&self, i: usize) -> DocId {
        self.source_docs[i]
    }

    pub fn source_docs(&self) -> &[DocId] {
        &self.source_docs
    }
}

/// Distribution over documents used to pick the source of each pair.
pub trait DocumentPrior {
    fn pick<R: Rng + ?Sized>(&self, eligible: &[DocId], rng: &mut R) -> DocId;
}

/// Every eligible document equally likely.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPrior;

impl DocumentPrior for UniformPrior {
    fn pick<R: Rng + ?Sized>(&self, eligible: &[DocId], rng: &mut R) -> DocId {
        eligible[rng.gen_range(0..eligible.len())]
    }
}

fn eligible_documents(store: &DocumentStore, ngram_width: usize) -> Vec<DocId> {
    store
        .documents()
        .iter()
        .filter(|d| d.len() >= ngram_width)
        .map(|d| d.doc_id)
        .collect()
}

fn fill_batch<R, P>(
    store: &DocumentStore,
    eligible: &[DocId],
    prior: &P,
    batch_size: usize,
    ngram_width: usize,
    rng: &mut R,
) -> Batch
where
    R: Rng + ?Sized,
    P: DocumentPrior,
{
    let mut tokens = Vec::with_capacity(batch_size * ngram_width);
    let mut docs = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let doc = store.document(prior.pick(eligible, rng));
        let start = rng.gen_range(0..=doc.len() - ngram_width);
        tokens.extend_from_slice(&doc.tokens[start..start + ngram_width]);
        docs.push(doc.doc_id);
    }
    Batch {
        ngram_width,
        ngram_tokens: tokens,
        source_docs: docs,
    }
}

/// Draws `batch_size` pairs: a document uniformly among those with at least
/// `ngram_width` tokens, then a uniformly placed window inside it.
pub fn sample_batch<R: Rng + ?Sized>(
    store: &DocumentStore,
    batch_size: usize,
    ngram_width: usize,
    rng: &mut R,
) -> Result<Batch> {
    if ngram_width == 0 {
        return Err(Error::InvalidArgument("n-gram width must be positive"));
    }
    let eligible = eligible_documents(store, ngram_width);
    if eligible.is_empty() {
        return Err(Error::NoEligibleDocument { ngram: ngram_width });
    }
    Ok(fill_batch(
        store,
        &eligible,
        &UniformPrior,
        batch_size,
        ngram_width,
        rng,
    ))
}

/// `count` independent uniform draws, with replacement, from `0..num_docs`.
pub fn sample_negatives<R: Rng + ?Sized>(
    count: usize,
    num_docs: usize,
    rng: &mut R,
) -> Result<Vec<DocId>> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "number of negatives must be positive",
        ));
    }
    if num_docs == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok((0..count)
        .map(|_| rng.gen_range(0..num_docs) as DocId)
        .collect())
}

/// `⌈(1/m) Σ_{|d| ≥ n} (|d| − n + 1)⌉`: the number of batches in one pass.
pub fn batches_per_epoch(store: &DocumentStore, batch_size: usize, ngram_width: usize) -> u64 {
    assert!(batch_size >= 1, "batch size must be positive");
    let windows: u64 = store
        .documents()
        .iter()
        .filter(|d| ngram_width > 0 && d.len() >= ngram_width)
        .map(|d| (d.len() - ngram_width + 1) as u64)
        .sum();
    windows.div_ceil(batch_size as u64)
}

/// Deterministic batch source: batch `b` depends only on the store, the seed
/// and `b`, so batches can be generated out of order or concurrently.
#[derive(Debug, Clone)]
pub struct BatchSampler<'a, P = UniformPrior> {
    store: &'a DocumentStore,
    eligible: Vec<DocId>,
    prior: P,
    batch_size: usize,
    ngram_width: usize,
    negatives: usize,
    seed: u64,
}

impl<'a> BatchSampler<'a, UniformPrior> {
    pub fn new(
        store: &'a DocumentStore,
        batch_size: usize,
        ngram_width: usize,
        negatives: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::with_prior(
            store,
            batch_size,
            ngram_width,
            negatives,
            seed,
            UniformPrior,
        )
    }
}

impl<'a, P: DocumentPrior> BatchSampler<'a, P> {
    pub fn with_prior(
        store: &'a DocumentStore,
        batch_size: usize,
        ngram_width: usize,
        negatives: usize,
        seed: u64,
        prior: P,
    ) -> Result<Self> {
        if batch_size == 0 || ngram_width == 0 || negatives == 0 {
            return Err(Error::InvalidArgument(
                "batch size, n-gram width and negatives must be positive",
            ));
        }
        let eligible = eligible_documents(store, ngram_width);
        if eligible.is_empty() {
            return Err(Error::NoEligibleDocument { ngram: ngram_width });
        }
        Ok(BatchSampler {
            store,
            eligible,
            prior,
            batch_size,
            ngram_width,
            negatives,
            seed,
        })
    }

    pub fn eligible(&self) -> &[DocId] {
        &self.eligible
    }

    fn rng_for(&self, batch_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(batch_index);
        rng
    }

    /// Batch `batch_index` and its `m × z` negatives (row-major per instance).
    pub fn batch(&self, batch_index: u64) -> (Batch, Vec<DocId>) {
        let mut rng = self.rng_for(batch_index);
        let batch = fill_batch(
            self.store,
            &self.eligible,
            &self.prior,
            self.batch_size,
            self.ngram_width,
            &mut rng,
        );
        let negatives =
            sample_negatives(self.batch_size * self.negatives, self.store.len(), &mut rng)
                .expect("store and negative count checked at construction");
        (batch, negatives)
    }
}
