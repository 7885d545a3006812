//! Learnable parameters and the forward computations.
//!
//! Training path for an n-gram: average word vectors, L2-normalize, apply the
//! linear transform, standardize per feature over the batch, add the nuisance
//! bias and clamp with hard-tanh. Inference path for a query: average word
//! vectors and apply the transform, nothing else.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::TermId;

/// Floor added to the per-feature batch variance before the square root.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Word vectors, document vectors, the word→document transform and the
/// nuisance bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    /// `|V| × d_w`
    pub word: Matrix,
    /// `|D| × d_d`
    pub doc: Matrix,
    /// `d_d × d_w`
    pub transform: Matrix,
    /// `d_d`, used during training only.
    pub bias: Vec<f64>,
    /// n-gram width the model is trained with.
    pub ngram_width: usize,
    /// Completed training iterations.
    pub iterations: u32,
}

impl ModelParameters {
    pub fn word_dim(&self) -> usize {
        self.word.cols()
    }

    pub fn doc_dim(&self) -> usize {
        self.doc.cols()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.word.rows()
    }

    pub fn num_documents(&self) -> usize {
        self.doc.rows()
    }

    /// Checks shapes agree with each other and all values are finite.
    pub fn validate(&self) -> Result<()> {
        let (dd, dw) = self.transform.shape();
        if self.word.cols() != dw || self.doc.cols() != dd || self.bias.len() != dd {
            return Err(Error::ShapeMismatch("parameter dimensions disagree"));
        }
        if !(self.word.is_finite()
            && self.doc.is_finite()
            && self.transform.is_finite()
            && self.bias.iter().all(|b| b.is_finite()))
        {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(())
    }

    /// Zero-valued parameters of the given shape.
    pub fn zeros(
        vocabulary_size: usize,
        num_documents: usize,
        word_dim: usize,
        doc_dim: usize,
        ngram_width: usize,
    ) -> Self {
        ModelParameters {
            word: Matrix::zeros(vocabulary_size, word_dim),
            doc: Matrix::zeros(num_documents, doc_dim),
            transform: Matrix::zeros(doc_dim, word_dim),
            bias: vec![0.0; doc_dim],
            ngram_width,
            iterations: 0,
        }
    }
}

/// Per-feature batch mean and (biased) variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl BatchStats {
    /// `sqrt(variance + VARIANCE_FLOOR)` per feature.
    pub fn deviation(&self) -> Vec<f64> {
        self.variance
            .iter()
            .map(|v| libm::sqrt(v + VARIANCE_FLOOR))
            .collect()
    }
}

pub fn l2_normalize(x: &[f64]) -> Result<Vec<f64>> {
    let n = linalg::norm(x);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / n).collect())
}

/// Mean of the word vectors of `word_ids`.
pub fn compose_ngram(word_ids: &[TermId], word: &Matrix) -> Result<Vec<f64>> {
    if word_ids.is_empty() {
        return Err(Error::EmptyNgram);
    }
    if word_ids.iter().any(|&w| w as usize >= word.rows()) {
        return Err(Error::InvalidArgument("term id outside the word matrix"));
    }
    let mut out = vec![0.0; word.cols()];
    for &w in word_ids {
        linalg::axpy(1.0, word.row(w as usize), &mut out);
    }
    let scale = 1.0 / word_ids.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

#[inline]
pub fn hard_tanh_scalar(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub fn hard_tanh(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| hard_tanh_scalar(v)).collect()
}

/// `W · norm(g(ngram))`, the projection before batch standardization.
pub fn project_raw(word_ids: &[TermId], params: &ModelParameters) -> Result<Vec<f64>> {
    let composed = compose_ngram(word_ids, &params.word)?;
    let unit = l2_normalize(&composed)?;
    Ok(params.transform.mul_vec(&unit))
}

/// Centers and scales every column of `raw` by its batch statistics.
/// Returns the pre-bias, pre-clamp values.
pub fn standardize_columns(raw: &Matrix) -> Result<(Matrix, BatchStats)> {
    let (m, dd) = raw.shape();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "standardization needs at least two rows",
        ));
    }
    let mut mean = vec![0.0; dd];
    for i in 0..m {
        linalg::axpy(1.0, raw.row(i), &mut mean);
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut variance = vec![0.0; dd];
    for i in 0..m {
        for ((var, &x), &mu) in variance.iter_mut().zip(raw.row(i)).zip(&mean) {
            *var += (x - mu) * (x - mu);
        }
    }
    variance.iter_mut().for_each(|v| *v /= m as f64);
    let stats = BatchStats { mean, variance };
    let deviation = stats.deviation();
    let mut normalized = Matrix::zeros(m, dd);
    for i in 0..m {
        let row = raw.row(i);
        for (j, out) in normalized.row_mut(i).iter_mut().enumerate() {
            *out = (row[j] - stats.mean[j]) / deviation[j];
        }
    }
    Ok((normalized, stats))
}

/// Batch-standardized activations `hard_tanh((T̃ − mean)/sqrt(var + floor) + bias)`.
pub fn standardize_batch(raw: &Matrix, bias: &[f64]) -> Result<(Matrix, BatchStats)> {
    if bias.len() != raw.cols() {
        return Err(Error::ShapeMismatch(
            "bias length differs from feature count",
        ));
    }
    let (mut out, stats) = standardize_columns(raw)?;
    for i in 0..out.rows() {
        for (v, b) in out.row_mut(i).iter_mut().zip(bias) {
            *v = hard_tanh_scalar(*v + b);
        }
    }
    Ok((out, stats))
}

/// Query projection `W · g(terms)` over already-encoded terms.
pub fn project_query_ids(terms: &[TermId], params: &ModelParameters) -> Result<Vec<f64>> {
    if terms.is_empty() {
        return Err(Error::QueryOutOfVocabulary);
    }
    let composed = compose_ngram(terms, &params.word)?;
    Ok(params.transform.mul_vec(&composed))
}

/// Query projection from raw terms; out-of-vocabulary terms are dropped.
pub fn project_query<T: AsRef<str>>(
    terms: &[T],
    params: &ModelParameters,
    vocabulary: &Vocabulary,
) -> Result<Vec<f64>> {
    project_query_ids(&vocabulary.encode(terms), params)
}

/// Scores a query through the training-path activations (normalization,
/// standardization with `stats`, bias, hard-tanh). For analysis only.
pub fn project_query_training_path(
    terms: &[TermId],
    params: &ModelParameters,
    stats: &BatchStats,
) -> Result<Vec<f64>> {
    if terms.is_empty() {
        return Err(Error::QueryOutOfVocabulary);
    }
    let raw = project_raw(terms, params)?;
    let deviation = stats.deviation();
    Ok(raw
        .iter()
        .enumerate()
        .map(|(j, &x)| hard_tanh_scalar((x - stats.mean[j]) / deviation[j] + params.bias[j]))
        .collect())
}

fn uniform_fill<R: Rng + ?Sized>(m: &mut Matrix, bound: f64, rng: &mut R) {
    for v in m.as_mut_slice() {
        // open interval: resample the (measure-zero) lower endpoint
        let mut x = rng.gen_range(-bound..bound);
        while x == -bound {
            x = rng.gen_range(-bound..bound);
        }
        *v = x;
    }
}

/// Word, document and transform entries uniform on `(−1/√fan_in, 1/√fan_in)`;
/// fan-in is `d_w` for words and the transform, `d_d` for documents. Bias is zero.
pub fn init_parameters<R: Rng + ?Sized>(
    vocabulary_size: usize,
    num_documents: usize,
    word_dim: usize,
    doc_dim: usize,
    ngram_width: usize,
    rng: &mut R,
) -> Result<ModelParameters> {
    if vocabulary_size == 0
        || num_documents == 0
        || word_dim == 0
        || doc_dim == 0
        || ngram_width == 0
    {
        return Err(Error::InvalidArgument("model dimensions must be positive"));
    }
    let mut params = ModelParameters::zeros(
        vocabulary_size,
        num_documents,
        word_dim,
        doc_dim,
        ngram_width,
    );
    let word_bound = 1.0 / libm::sqrt(word_dim as f64);
    let doc_bound = 1.0 / libm::sqrt(doc_dim as f64);
    uniform_fill(&mut params.word, word_bound, rng);
    uniform_fill(&mut params.doc, doc_bound, rng);
    uniform_fill(&mut params.transform, word_bound, rng);
    Ok(params)
}

/// Parameter count and resident bytes for a model of the given shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSize {
    pub parameter_count: u64,
    pub bytes: u64,
}

/// `|V|·d_w + d_d·d_w + |D|·d_d + d_d` parameters, each held
/// `optimizer_copies` times at `bytes_per_value`.
pub fn estimate_model_size(
    vocabulary_size: u64,
    num_documents: u64,
    word_dim: u64,
    doc_dim: u64,
    bytes_per_value: u64,
    optimizer_copies: u64,
) -> ModelSize {
    let parameter_count =
        vocabulary_size * word_dim + doc_dim * word_dim + num_documents * doc_dim + doc_dim;
    ModelSize {
        parameter_count,
        bytes: parameter_count * bytes_per_value * optimizer_copies,
    }
}
