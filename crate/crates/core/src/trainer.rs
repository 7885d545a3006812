//! Adjusted negative-sampling objective, its exact gradients, Adam, and the
//! epoch loop.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocumentStore;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::{self, ModelParameters};
use crate::sampler::{self, Batch, BatchSampler};
use crate::DocId;

/// Probabilities are clamped to `[PROBABILITY_FLOOR, 1 − PROBABILITY_FLOOR]`
/// before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub word_dim: usize,
    pub doc_dim: usize,
    pub ngram_width: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub batch_size: usize,
    pub iterations: u32,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            word_dim: 300,
            doc_dim: 256,
            ngram_width: 10,
            negatives: 10,
            learning_rate: 0.001,
            regularization: 0.01,
            batch_size: 51_200,
            iterations: 15,
            adam: AdamConfig::default(),
            seed: 0x6e76_736d,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.word_dim == 0 || self.doc_dim == 0 || self.ngram_width == 0 {
            return Err(Error::InvalidArgument(
                "dimensions and n-gram width must be positive",
            ));
        }
        if self.negatives == 0 {
            return Err(Error::InvalidArgument(
                "number of negatives must be positive",
            ));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument("batch size must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.regularization >= 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive and regularization non-negative",
            ));
        }
        self.adam.validate()
    }
}

/// Adam decay rates and stability constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon <= 0.0
        {
            return Err(Error::InvalidArgument(
                "adam decay rates must lie in [0, 1) and epsilon be positive",
            ));
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `σ(doc · projection)`.
pub fn similarity_prob(doc_vector: &[f64], projection: &[f64]) -> f64 {
    sigmoid(linalg::dot(doc_vector, projection))
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
}

#[inline]
fn unclamped(p: f64) -> bool {
    (PROBABILITY_FLOOR..=1.0 - PROBABILITY_FLOOR).contains(&p)
}

/// `(z+1)/(2z) · (z·log P(S|d⁺) + Σ_k log(1 − P(S|d_k)))` with `z = negatives.len()`.
pub fn instance_log_prob(
    positive: DocId,
    projection: &[f64],
    negatives: &[DocId],
    doc: &Matrix,
) -> f64 {
    let z = negatives.len() as f64;
    let weight = (z + 1.0) / (2.0 * z);
    let positive = libm::log(clamp_prob(similarity_prob(
        doc.row(positive as usize),
        projection,
    )));
    let negative: f64 = negatives
        .iter()
        .map(|&d| {
            libm::log(clamp_prob(
                1.0 - similarity_prob(doc.row(d as usize), projection),
            ))
        })
        .sum();
    weight * (z * positive + negative)
}

/// Gradient of the batch loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub word: Matrix,
    pub doc: Matrix,
    pub transform: Matrix,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParameters) -> Self {
        Gradients {
            word: Matrix::zeros(params.word.rows(), params.word.cols()),
            doc: Matrix::zeros(params.doc.rows(), params.doc.cols()),
            transform: Matrix::zeros(params.transform.rows(), params.transform.cols()),
            bias: vec![0.0; params.bias.len()],
        }
    }
}

/// Cached intermediate values of one forward pass over a batch.
struct Forward {
    /// L2 norm of each composed n-gram.
    composed_norm: Vec<f64>,
    /// `norm(g(ngram))`, `m × d_w`.
    unit: Matrix,
    /// Pre-bias standardized projection, `m × d_d`.
    normalized: Matrix,
    /// `sqrt(var + floor)` per feature.
    deviation: Vec<f64>,
    /// Pre-clamp activation `normalized + bias`, `m × d_d`.
    activation: Matrix,
    /// Post-clamp `T`, `m × d_d`.
    output: Matrix,
}

fn negatives_per_instance(batch: &Batch, negatives: &[DocId]) -> Result<usize> {
    let m = batch.len();
    if m < 2 {
        return Err(Error::InvalidArgument("batch must hold at least two pairs"));
    }
    if negatives.is_empty() || !negatives.len().is_multiple_of(m) {
        return Err(Error::ShapeMismatch("negatives must be m × z"));
    }
    Ok(negatives.len() / m)
}

fn check_ids(params: &ModelParameters, batch: &Batch, negatives: &[DocId]) -> Result<()> {
    let docs = params.num_documents() as DocId;
    if batch
        .source_docs()
        .iter()
        .chain(negatives)
        .any(|&d| d >= docs)
    {
        return Err(Error::InvalidArgument(
            "document id outside the document matrix",
        ));
    }
    Ok(())
}

fn forward(params: &ModelParameters, batch: &Batch) -> Result<Forward> {
    let m = batch.len();
    let (dd, dw) = params.transform.shape();
    let mut composed_norm = Vec::with_capacity(m);
    let mut unit = Matrix::zeros(m, dw);
    let mut raw = Matrix::zeros(m, dd);
    for i in 0..m {
        let composed = model::compose_ngram(batch.ngram(i), &params.word)?;
        let norm = linalg::norm(&composed);
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        composed_norm.push(norm);
        for (u, c) in unit.row_mut(i).iter_mut().zip(&composed) {
            *u = c / norm;
        }
        let projected = params.transform.mul_vec(unit.row(i));
        raw.row_mut(i).copy_from_slice(&projected);
    }
    let (normalized, stats) = model::standardize_columns(&raw)?;
    let deviation = stats.deviation();
    let mut activation = normalized.clone();
    let mut output = Matrix::zeros(m, dd);
    for i in 0..m {
        for ((a, t), b) in activation
            .row_mut(i)
            .iter_mut()
            .zip(output.row_mut(i))
            .zip(&params.bias)
        {
            *a += b;
            *t = model::hard_tanh_scalar(*a);
        }
    }
    Ok(Forward {
        composed_norm,
        unit,
        normalized,
        deviation,
        activation,
        output,
    })
}

fn regularizer(params: &ModelParameters, regularization: f64, m: usize) -> f64 {
    if regularization == 0.0 {
        return 0.0;
    }
    regularization / (2.0 * m as f64)
        * (params.word.frobenius_sq() + params.doc.frobenius_sq() + params.transform.frobenius_sq())
}

/// `−(1/m) Σ_i log P̃(d_i | p_i) + (λ/2m)(‖R_V‖² + ‖R_D‖² + ‖W‖²)`.
///
/// `negatives` holds `z` ids per instance, row-major. The bias is not
/// regularized.
pub fn batch_loss(
    params: &ModelParameters,
    batch: &Batch,
    negatives: &[DocId],
    regularization: f64,
) -> Result<f64> {
    let z = negatives_per_instance(batch, negatives)?;
    check_ids(params, batch, negatives)?;
    let fwd = forward(params, batch)?;
    let m = batch.len();
    let mut total = 0.0;
    for i in 0..m {
        total += instance_log_prob(
            batch.source_doc(i),
            fwd.output.row(i),
            &negatives[i * z..(i + 1) * z],
            &params.doc,
        );
    }
    let loss = -total / m as f64 + regularizer(params, regularization, m);
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss"));
    }
    Ok(loss)
}

/// Loss and exact gradients of [`batch_loss`], back-propagated through the
/// batch statistics and the n-gram L2 normalization.
pub fn batch_gradients(
    params: &ModelParameters,
    batch: &Batch,
    negatives: &[DocId],
    regularization: f64,
) -> Result<(f64, Gradients)> {
    let z = negatives_per_instance(batch, negatives)?;
    check_ids(params, batch, negatives)?;
    let fwd = forward(params, batch)?;
    let m = batch.len();
    let inv_m = 1.0 / m as f64;
    let (dd, dw) = params.transform.shape();
    let weight = (z as f64 + 1.0) / (2.0 * z as f64);
    let mut grads = Gradients::zeros_like(params);

    // Output layer: d loss / d T and d loss / d R_D.
    let mut total = 0.0;
    let mut grad_output = Matrix::zeros(m, dd);
    for i in 0..m {
        let t = fwd.output.row(i);
        let pos = batch.source_doc(i) as usize;
        let p = similarity_prob(params.doc.row(pos), t);
        total += z as f64 * libm::log(clamp_prob(p));
        // d/dx log σ(x) = 1 − σ(x)
        let coeff = if unclamped(p) {
            -inv_m * weight * z as f64 * (1.0 - p)
        } else {
            0.0
        };
        linalg::axpy(coeff, params.doc.row(pos), grad_output.row_mut(i));
        linalg::axpy(coeff, t, grads.doc.row_mut(pos));
        for &neg in &negatives[i * z..(i + 1) * z] {
            let neg = neg as usize;
            let q = similarity_prob(params.doc.row(neg), t);
            total += libm::log(clamp_prob(1.0 - q));
            // d/dx log(1 − σ(x)) = −σ(x)
            let coeff = if unclamped(1.0 - q) {
                inv_m * weight * q
            } else {
                0.0
            };
            linalg::axpy(coeff, params.doc.row(neg), grad_output.row_mut(i));
            linalg::axpy(coeff, t, grads.doc.row_mut(neg));
        }
    }
    let loss = -weight * total * inv_m + regularizer(params, regularization, m);
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss"));
    }

    // hard-tanh: pass-through strictly inside (−1, 1).
    let mut grad_norm = grad_output;
    for i in 0..m {
        for (g, &a) in grad_norm.row_mut(i).iter_mut().zip(fwd.activation.row(i)) {
            if a <= -1.0 || a >= 1.0 {
                *g = 0.0;
            }
        }
        linalg::axpy(1.0, grad_norm.row(i), &mut grads.bias);
    }

    // Standardization, with mean and variance as functions of the batch:
    // dT̃_ij = (dX_ij − mean_i(dX_·j) − X_ij · mean_i(dX_·j X_·j)) / σ_j
    let mut mean_grad = vec![0.0; dd];
    let mut mean_grad_x = vec![0.0; dd];
    for i in 0..m {
        let g = grad_norm.row(i);
        let x = fwd.normalized.row(i);
        for j in 0..dd {
            mean_grad[j] += g[j] * inv_m;
            mean_grad_x[j] += g[j] * x[j] * inv_m;
        }
    }
    let mut grad_raw = vec![0.0; dd];
    for i in 0..m {
        let g = grad_norm.row(i);
        let x = fwd.normalized.row(i);
        for j in 0..dd {
            grad_raw[j] = (g[j] - mean_grad[j] - x[j] * mean_grad_x[j]) / fwd.deviation[j];
        }
        // T̃ = W u
        let u = fwd.unit.row(i);
        for (j, &gr) in grad_raw.iter().enumerate() {
            linalg::axpy(gr, u, grads.transform.row_mut(j));
        }
        let grad_unit = params.transform.mul_vec_transposed(&grad_raw);
        // u = c / ‖c‖  ⇒  dc = (du − u (u·du)) / ‖c‖
        let along = linalg::dot(u, &grad_unit);
        let ngram = batch.ngram(i);
        let scale = 1.0 / (fwd.composed_norm[i] * ngram.len() as f64);
        let mut grad_composed = vec![0.0; dw];
        for k in 0..dw {
            grad_composed[k] = (grad_unit[k] - u[k] * along) * scale;
        }
        for &w in ngram {
            linalg::axpy(1.0, &grad_composed, grads.word.row_mut(w as usize));
        }
    }

    if regularization != 0.0 {
        let c = regularization * inv_m;
        linalg::axpy(c, params.word.as_slice(), grads.word.as_mut_slice());
        linalg::axpy(c, params.doc.as_slice(), grads.doc.as_mut_slice());
        linalg::axpy(
            c,
            params.transform.as_slice(),
            grads.transform.as_mut_slice(),
        );
    }
    Ok((loss, grads))
}

/// First and second moment accumulators for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        AdamState {
            first: Gradients::zeros_like(params),
            second: Gradients::zeros_like(params),
            step: 0,
        }
    }
}

fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    first: &mut [f64],
    second: &mut [f64],
    lr_t: f64,
    eps_t: f64,
    cfg: &AdamConfig,
) {
    for (((p, &g), m), v) in theta
        .iter_mut()
        .zip(grad)
        .zip(first.iter_mut())
        .zip(second.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= lr_t * *m / (libm::sqrt(*v) + eps_t);
    }
}

/// One dense Adam update of every parameter:
/// `θ ← θ − α · m̂ / (√v̂ + ε)` with bias-corrected moments.
pub fn adam_step(
    params: &mut ModelParameters,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.word.shape() != params.word.shape()
        || grads.doc.shape() != params.doc.shape()
        || grads.transform.shape() != params.transform.shape()
        || grads.bias.len() != params.bias.len()
        || state.first.word.shape() != params.word.shape()
        || state.first.doc.shape() != params.doc.shape()
    {
        return Err(Error::ShapeMismatch("gradient or optimizer state shape"));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let c2 = libm::sqrt(1.0 - libm::pow(cfg.beta2, t as f64));
    // m̂/(√v̂ + ε) = (m/c1) / (√v/c2 + ε) = (c2/c1) · m / (√v + ε·c2)
    let lr_t = learning_rate * c2 / c1;
    let eps_t = cfg.epsilon * c2;
    let AdamState { first, second, .. } = state;
    adam_update(
        params.word.as_mut_slice(),
        grads.word.as_slice(),
        first.word.as_mut_slice(),
        second.word.as_mut_slice(),
        lr_t,
        eps_t,
        cfg,
    );
    adam_update(
        params.doc.as_mut_slice(),
        grads.doc.as_slice(),
        first.doc.as_mut_slice(),
        second.doc.as_mut_slice(),
        lr_t,
        eps_t,
        cfg,
    );
    adam_update(
        params.transform.as_mut_slice(),
        grads.transform.as_slice(),
        first.transform.as_mut_slice(),
        second.transform.as_mut_slice(),
        lr_t,
        eps_t,
        cfg,
    );
    adam_update(
        &mut params.bias,
        &grads.bias,
        &mut first.bias,
        &mut second.bias,
        lr_t,
        eps_t,
        cfg,
    );
    Ok(())
}

/// Model snapshot after `iteration` passes (0 = initialization).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: u32,
    pub params: ModelParameters,
    /// Mean batch loss over the iteration; `None` for the initial snapshot.
    pub mean_loss: Option<f64>,
}

/// Stepwise trainer. Callers drive iterations so they can persist
/// checkpoints as they are produced.
#[derive(Debug)]
pub struct Trainer<'a> {
    config: TrainConfig,
    sampler: BatchSampler<'a>,
    params: ModelParameters,
    adam: AdamState,
    batches_per_iteration: u64,
    iteration: u32,
}

impl<'a> Trainer<'a> {
    pub fn new(store: &'a DocumentStore, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let sampler = BatchSampler::new(
            store,
            config.batch_size,
            config.ngram_width,
            config.negatives,
            config.seed,
        )?;
        // initialization uses its own stream so it never overlaps batch 0
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(u64::MAX);
        let params = model::init_parameters(
            store.vocabulary().len(),
            store.len(),
            config.word_dim,
            config.doc_dim,
            config.ngram_width,
            &mut rng,
        )?;
        let adam = AdamState::new(&params);
        let batches_per_iteration =
            sampler::batches_per_epoch(store, config.batch_size, config.ngram_width);
        Ok(Trainer {
            config,
            sampler,
            params,
            adam,
            batches_per_iteration,
            iteration: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn batches_per_iteration(&self) -> u64 {
        self.batches_per_iteration
    }

    pub fn checkpoint(&self, mean_loss: Option<f64>) -> Checkpoint {
        Checkpoint {
            iteration: self.iteration,
            params: self.params.clone(),
            mean_loss,
        }
    }

    /// Runs one pass of `batches_per_iteration` batches. `on_batch` receives
    /// `(iteration, batch index within the iteration, loss)`.
    pub fn run_iteration<F>(&mut self, mut on_batch: F) -> Result<Checkpoint>
    where
        F: FnMut(u32, u64, f64),
    {
        let iteration = self.iteration + 1;
        let mut loss_sum = 0.0;
        for b in 0..self.batches_per_iteration {
            let global = u64::from(self.iteration) * self.batches_per_iteration + b;
            let (batch, negatives) = self.sampler.batch(global);
            let (loss, grads) =
                batch_gradients(&self.params, &batch, &negatives, self.config.regularization)?;
            adam_step(
                &mut self.params,
                &grads,
                &mut self.adam,
                self.config.learning_rate,
                &self.config.adam,
            )?;
            on_batch(iteration, b, loss);
            loss_sum += loss;
        }
        self.params.validate()?;
        self.iteration = iteration;
        self.params.iterations = iteration;
        let mean = if self.batches_per_iteration == 0 {
            None
        } else {
            Some(loss_sum / self.batches_per_iteration as f64)
        };
        Ok(self.checkpoint(mean))
    }
}

/// Trains for `config.iterations` passes and returns every checkpoint,
/// starting with the initialization.
pub fn train(store: &DocumentStore, config: TrainConfig) -> Result<Vec<Checkpoint>> {
    let iterations = config.iterations;
    let mut trainer = Trainer::new(store, config)?;
    let mut out = Vec::with_capacity(iterations as usize + 1);
    out.push(trainer.checkpoint(None));
    for _ in 0..iterations {
        out.push(trainer.run_iteration(|_, _, _| {})?);
    }
    Ok(out)
}
