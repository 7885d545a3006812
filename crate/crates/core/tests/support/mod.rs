//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use nvsm_core::eval::Qrels;
use nvsm_core::linalg::Matrix;
use nvsm_core::model::ModelParameters;
use nvsm_core::sampler::Batch;
use nvsm_core::DocId;
use rand::Rng;

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const PROB_FLOOR: f64 = 1e-12;

/// A small model, a batch and its negatives.
#[derive(Debug, Clone)]
pub struct TinyCase {
    pub params: ModelParameters,
    pub batch: Batch,
    pub negatives: Vec<DocId>,
    pub regularization: f64,
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
}

/// Draws a case with |V| ≤ 10, |D| ≤ 6, d_w ≤ 6, d_d ≤ 4, m ∈ {2, 4},
/// z ∈ {1, 2}. Cases whose activations come within `margin` of the
/// hard-tanh corners are redrawn.
pub fn tiny_case<R: Rng>(rng: &mut R, margin: f64) -> TinyCase {
    loop {
        let vocab = rng.gen_range(2..=10);
        let docs = rng.gen_range(2..=6);
        let dw = rng.gen_range(1..=6);
        let dd = rng.gen_range(1..=4);
        let m = if rng.gen_bool(0.5) { 2 } else { 4 };
        let z = rng.gen_range(1..=2);
        let n = rng.gen_range(1..=3);
        let mut params = ModelParameters::zeros(vocab, docs, dw, dd, n);
        params.word = random_matrix(vocab, dw, rng);
        params.doc = random_matrix(docs, dd, rng);
        params.transform = random_matrix(dd, dw, rng);
        params.bias = (0..dd).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let tokens: Vec<u32> = (0..m * n).map(|_| rng.gen_range(0..vocab as u32)).collect();
        let sources: Vec<DocId> = (0..m).map(|_| rng.gen_range(0..docs as u32)).collect();
        let negatives: Vec<DocId> = (0..m * z).map(|_| rng.gen_range(0..docs as u32)).collect();
        let batch = Batch::new(n, tokens, sources).unwrap();
        let case = TinyCase {
            params,
            batch,
            negatives,
            regularization: rng.gen_range(0.0..0.1),
        };
        if let Some(acts) = oracle_activations(&case.params, &case.batch) {
            let ok = acts
                .iter()
                .flatten()
                .all(|a| (a.abs() - 1.0).abs() > margin);
            let var_ok = oracle_variances(&case.params, &case.batch)
                .iter()
                .all(|&v| v > 1e-4);
            if ok && var_ok {
                return case;
            }
        }
    }
}

fn oracle_raw(params: &ModelParameters, batch: &Batch) -> Option<Vec<Vec<f64>>> {
    let dw = params.word.cols();
    let dd = params.transform.rows();
    let mut raw = Vec::new();
    for i in 0..batch.len() {
        let ngram = batch.ngram(i);
        let mut g = vec![0.0; dw];
        for k in 0..dw {
            let mut s = 0.0;
            for &w in ngram {
                s += params.word.get(w as usize, k);
            }
            g[k] = s / ngram.len() as f64;
        }
        let mut sq = 0.0;
        for k in 0..dw {
            sq += g[k] * g[k];
        }
        let norm = sq.sqrt();
        if norm < 1e-3 {
            return None;
        }
        let mut t = vec![0.0; dd];
        for j in 0..dd {
            for k in 0..dw {
                t[j] += params.transform.get(j, k) * g[k] / norm;
            }
        }
        raw.push(t);
    }
    Some(raw)
}

fn oracle_variances(params: &ModelParameters, batch: &Batch) -> Vec<f64> {
    let Some(raw) = oracle_raw(params, batch) else {
        return vec![0.0];
    };
    let m = raw.len() as f64;
    (0..raw[0].len())
        .map(|j| {
            let mean = raw.iter().map(|r| r[j]).sum::<f64>() / m;
            raw.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m
        })
        .collect()
}

/// Pre-clamp activations `(T̃ − mean)/sqrt(var + floor) + β`.
pub fn oracle_activations(params: &ModelParameters, batch: &Batch) -> Option<Vec<Vec<f64>>> {
    let raw = oracle_raw(params, batch)?;
    let m = raw.len() as f64;
    let dd = raw[0].len();
    let mut out = raw.clone();
    for j in 0..dd {
        let mean = raw.iter().map(|r| r[j]).sum::<f64>() / m;
        let var = raw.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m;
        for (i, r) in raw.iter().enumerate() {
            out[i][j] = (r[j] - mean) / (var + VARIANCE_FLOOR).sqrt() + params.bias[j];
        }
    }
    Some(out)
}

/// Scalar-loop evaluation of the batch objective.
pub fn oracle_loss(
    params: &ModelParameters,
    batch: &Batch,
    negatives: &[DocId],
    lambda: f64,
) -> f64 {
    let acts = oracle_activations(params, batch).expect("non-degenerate n-grams");
    let m = batch.len();
    let z = negatives.len() / m;
    let dd = params.doc.cols();
    let sigma = |x: f64| 1.0 / (1.0 + (-x).exp());
    let clamp = |p: f64| p.max(PROB_FLOOR).min(1.0 - PROB_FLOOR);
    let mut total = 0.0;
    for i in 0..m {
        let t: Vec<f64> = acts[i].iter().map(|a| a.max(-1.0).min(1.0)).collect();
        let dot = |d: usize| (0..dd).map(|j| params.doc.get(d, j) * t[j]).sum::<f64>();
        let mut inner = z as f64 * clamp(sigma(dot(batch.source_doc(i) as usize))).ln();
        for k in 0..z {
            let d = negatives[i * z + k] as usize;
            inner += clamp(1.0 - sigma(dot(d))).ln();
        }
        total += (z as f64 + 1.0) / (2.0 * z as f64) * inner;
    }
    let sq = |mat: &Matrix| mat.as_slice().iter().map(|v| v * v).sum::<f64>();
    -total / m as f64
        + lambda / (2.0 * m as f64) * (sq(&params.word) + sq(&params.doc) + sq(&params.transform))
}

fn slot(p: &mut ModelParameters, which: usize, idx: usize) -> &mut f64 {
    match which {
        0 => &mut p.word.as_mut_slice()[idx],
        1 => &mut p.doc.as_mut_slice()[idx],
        2 => &mut p.transform.as_mut_slice()[idx],
        _ => &mut p.bias[idx],
    }
}

/// Central differences of [`oracle_loss`] for every parameter, flattened in
/// the order word, doc, transform, bias.
pub fn finite_difference_gradient(case: &TinyCase, step: f64) -> Vec<f64> {
    let eval =
        |p: &ModelParameters| oracle_loss(p, &case.batch, &case.negatives, case.regularization);
    let mut p = case.params.clone();
    let lens = [
        p.word.as_slice().len(),
        p.doc.as_slice().len(),
        p.transform.as_slice().len(),
        p.bias.len(),
    ];
    let mut out = Vec::new();
    for (which, &len) in lens.iter().enumerate() {
        for idx in 0..len {
            let orig = *slot(&mut p, which, idx);
            *slot(&mut p, which, idx) = orig + step;
            let plus = eval(&p);
            *slot(&mut p, which, idx) = orig - step;
            let minus = eval(&p);
            *slot(&mut p, which, idx) = orig;
            out.push((plus - minus) / (2.0 * step));
        }
    }
    out
}

/// `|a − f| / max(|a|, |f|, 1e-6)`, maximized over coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Hand-rolled scalar Adam over a fixed gradient sequence.
pub fn scalar_adam(theta0: f64, grads: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) -> f64 {
    let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
    for (t, g) in grads.iter().enumerate() {
        let t = (t + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mhat = m / (1.0 - b1.powi(t));
        let vhat = v / (1.0 - b2.powi(t));
        theta -= lr * mhat / (vhat.sqrt() + eps);
    }
    theta
}

/// Definition-level AP: mean over relevant docs of precision at their rank,
/// counting unretrieved ones as zero.
/// AP as the sum of P@k over relevant ranks k (in rank order), over R.
/// Each P@k is recounted from scratch.
pub fn oracle_ap(ranking: &[String], relevant: &[String], depth: usize) -> f64 {
    let mut total = 0.0;
    for k in 1..=ranking.len().min(depth) {
        if relevant.contains(&ranking[k - 1]) {
            let hits = ranking[..k].iter().filter(|d| relevant.contains(d)).count();
            total += hits as f64 / k as f64;
        }
    }
    total / relevant.len() as f64
}

pub fn oracle_ndcg(ranking: &[String], grades: &[(String, u32)], depth: usize) -> f64 {
    let grade = |d: &String| grades.iter().find(|(g, _)| g == d).map_or(0, |(_, g)| *g);
    let mut dcg = 0.0;
    for (i, d) in ranking.iter().enumerate().take(depth) {
        dcg += grade(d) as f64 / ((i + 2) as f64).log2();
    }
    let mut ideal: Vec<u32> = grades.iter().map(|(_, g)| *g).filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for (i, g) in ideal.iter().enumerate().take(depth) {
        idcg += *g as f64 / ((i + 2) as f64).log2();
    }
    dcg / idcg
}

pub fn oracle_precision(ranking: &[String], relevant: &[String], k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .filter(|d| relevant.contains(d))
        .count() as f64
        / k as f64
}

pub fn qrels_from(query: &str, grades: &[(String, u32)]) -> Qrels {
    let mut q = Qrels::new();
    for (d, g) in grades {
        q.insert(query, d.as_str(), *g);
    }
    q
}
