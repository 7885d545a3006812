//! Significance tests and the word-norm frequency analysis.

use crate::error::{Error, Result};
use nvsm_core::eval::{frequency_partition, word_norm_table, TermNorm};
use nvsm_core::{ModelParameters, Vocabulary};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// A t statistic with its degrees of freedom and two-tailed p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

fn two_tailed(t: f64, dof: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|_| Error::Statistics("invalid degrees of freedom"))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Two-tailed paired Student's t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Statistics("paired samples differ in length"));
    }
    if a.len() < 2 {
        return Err(Error::Statistics("paired t-test needs at least two pairs"));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let var = variance(&diff);
    if var == 0.0 {
        return Err(Error::Statistics("differences have zero variance"));
    }
    let n = diff.len() as f64;
    let t = mean(&diff) / (var / n).sqrt();
    let dof = n - 1.0;
    Ok(TTest {
        t,
        dof,
        p: two_tailed(t, dof)?,
    })
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Statistics(
            "Welch's t-test needs at least two values per sample",
        ));
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Statistics("both samples have zero variance"));
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let dof = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(TTest {
        t,
        dof,
        p: two_tailed(t, dof)?,
    })
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Statistics(
            "correlation needs two equal-length samples of at least three values",
        ));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Statistics("correlation of a constant sample"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson r with a permutation p-value: the add-one smoothed share of
/// shuffles of `y` whose |r| reaches the observed |r|.
pub fn pearson_permutation(
    x: &[f64],
    y: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let r = pearson(x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = y.to_vec();
    let mut hits = 0usize;
    // guard against rounding when a permutation reproduces the observed order
    let threshold = r.abs() - 1e-12;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        if pearson(x, &shuffled)?.abs() >= threshold {
            hits += 1;
        }
    }
    Ok((r, (hits + 1) as f64 / (permutations + 1) as f64))
}

/// Word norms against collection frequency plus the middle-versus-rest test.
#[derive(Debug, Clone, PartialEq)]
pub struct LuhnAnalysis {
    pub table: Vec<TermNorm>,
    pub partition_sizes: [usize; 3],
    pub middle_mean: f64,
    pub outer_mean: f64,
    pub test: TTest,
}

/// Welch's test of mid-frequency norms against the pooled most and least
/// frequent quarters. Identical samples report `t = 0, p = 1`.
pub fn luhn_norm_analysis(
    params: &ModelParameters,
    vocabulary: &Vocabulary,
) -> Result<LuhnAnalysis> {
    let partition = frequency_partition(vocabulary)?;
    let table = word_norm_table(params, vocabulary)?;
    let norms = |ids: &[u32]| -> Vec<f64> { ids.iter().map(|&i| table[i as usize].norm).collect() };
    let middle = norms(&partition.middle);
    let mut outer = norms(&partition.top);
    outer.extend(norms(&partition.bottom));
    let (middle_mean, outer_mean) = (mean(&middle), mean(&outer));
    let test = match welch_t_test(&middle, &outer) {
        Err(Error::Statistics(_))
            if middle_mean == outer_mean && variance(&middle) == 0.0 && variance(&outer) == 0.0 =>
        {
            TTest {
                t: 0.0,
                dof: (middle.len() + outer.len() - 2) as f64,
                p: 1.0,
            }
        }
        other => other?,
    };
    Ok(LuhnAnalysis {
        partition_sizes: [
            partition.bottom.len(),
            partition.middle.len(),
            partition.top.len(),
        ],
        table,
        middle_mean,
        outer_mean,
        test,
    })
}
