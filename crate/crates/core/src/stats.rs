//! Summary statistics over trial results: moments, bootstrap standard errors
//! and rank correlation.

use rand::Rng;

use crate::rng::{kmean, ksum, rng_from_seed};

/// Population variance (divisor `n`).
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = kmean(values);
    ksum(values.iter().map(|v| (v - m) * (v - m))) / values.len() as f64
}

/// Unbiased sample variance (divisor `n − 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    population_variance(values) * values.len() as f64 / (values.len() - 1) as f64
}

/// Sum of squared weights after normalizing `weights` to sum to one.
pub fn squared_weight_sum(weights: &[f64]) -> f64 {
    let total = ksum(weights.iter().copied());
    ksum(weights.iter().map(|w| (w / total) * (w / total)))
}

/// A statistic of a sample.
pub type Statistic<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Bootstrap standard errors of several statistics, computed on the same
/// `resamples` resampled copies of `values`.
pub fn bootstrap_se(values: &[f64], resamples: usize, seed: u64, stats: &[Statistic<'_>]) -> Vec<f64> {
    if values.is_empty() || resamples < 2 {
        return vec![f64::NAN; stats.len()];
    }
    let mut rng = rng_from_seed(seed);
    let mut buf = vec![0.0; values.len()];
    let mut reps: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); stats.len()];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = values[rng.random_range(0..values.len())];
        }
        for (k, stat) in stats.iter().enumerate() {
            reps[k].push(stat(&buf));
        }
    }
    reps.iter().map(|r| sample_variance(r).sqrt()).collect()
}

/// Ranks with ties assigned their average rank, starting at 1.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (kmean(x), kmean(y));
    let sxy = ksum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = ksum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = ksum(y.iter().map(|b| (b - my) * (b - my)));
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation; `NaN` when either input is constant or lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return f64::NAN;
    }
    pearson(&ranks(x), &ranks(y))
}
