//! k-means, adjusted Rand index and centroid separation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { restarts: 50, max_iter: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    /// SSE after each assignment step of the kept restart.
    pub sse_trace: Vec<f64>,
    pub iterations: usize,
    /// Fewer than `k` distinct points; some clusters share a location.
    pub degenerate: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let d = points[0].len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        let mut sse = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, dist) = nearest(p, &centroids);
            sse += dist;
            if assignments[i] != j {
                assignments[i] = j;
                changed = true;
            }
        }
        trace.push(sse);
        if !changed || iterations >= max_iter {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    let sse = *trace.last().expect("at least one pass");
    KMeansResult { assignments, centroids, sse, sse_trace: trace, iterations, degenerate: false }
}

fn distinct_points(points: &[Vec<f64>], limit: usize) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.iter().any(|q| *q == p) {
            seen.push(p);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

/// k-means with k-means++ seeding; the restart with the lowest SSE is kept.
/// Each restart runs until assignments stop changing. Empty clusters keep
/// their previous centroid.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<KMeansResult, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidK(k));
    }
    if points.len() < k {
        return Err(AnalyticsError::TooFewSamples { needed: k, got: points.len() });
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(AnalyticsError::LengthMismatch);
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, r as u64]));
        let init = plus_plus_init(points, k, &mut rng);
        let res = lloyd(points, init, opts.max_iter.max(1));
        if best.as_ref().is_none_or(|b| res.sse < b.sse) {
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one restart");
    best.degenerate = distinct_points(points, k) < k;
    Ok(best)
}

fn comb2(x: u64) -> i128 {
    let x = x as i128;
    x * (x - 1) / 2
}

/// Adjusted Rand index from the contingency table of two labelings.
/// Computed in exact integer arithmetic up to the final division. Returns 1
/// when both labelings are the same trivial partition (all one cluster, or
/// all singletons), where the usual formula is 0/0.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, AnalyticsError> {
    if a.len() != b.len() {
        return Err(AnalyticsError::LengthMismatch);
    }
    if a.len() < 2 {
        return Err(AnalyticsError::TooFewSamples { needed: 2, got: a.len() });
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&c| comb2(c)).sum();
    let sa: i128 = rows.values().map(|&c| comb2(c)).sum();
    let sb: i128 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(a.len() as u64);
    let num = 2 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Euclidean distance between exactly two centroids.
pub fn centroid_distance(centroids: &[Vec<f64>]) -> Result<f64, AnalyticsError> {
    if centroids.len() != 2 {
        return Err(AnalyticsError::WrongCentroidCount(centroids.len()));
    }
    if centroids[0].len() != centroids[1].len() {
        return Err(AnalyticsError::LengthMismatch);
    }
    Ok(sq_dist(&centroids[0], &centroids[1]).sqrt())
}

/// Per-dimension z-scores using the combined sample's mean and SD (n-1).
/// Dimensions with zero SD are only centered and reported in `flat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub points: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub flat: Vec<usize>,
}

pub fn standardize(points: &[Vec<f64>]) -> Result<Standardized, AnalyticsError> {
    if points.len() < 2 {
        return Err(AnalyticsError::TooFewSamples { needed: 2, got: points.len() });
    }
    let d = points[0].len();
    let mut means = vec![0.0; d];
    let mut sds = vec![0.0; d];
    let mut flat = Vec::new();
    for j in 0..d {
        let col: Vec<f64> = points.iter().map(|p| p[j]).collect();
        means[j] = super::stats::mean(&col);
        sds[j] = super::stats::sample_sd(&col);
        if !(sds[j] > 0.0) {
            flat.push(j);
        }
    }
    let z = points
        .iter()
        .map(|p| {
            (0..d)
                .map(|j| {
                    let s = if flat.contains(&j) { 1.0 } else { sds[j] };
                    (p[j] - means[j]) / s
                })
                .collect()
        })
        .collect();
    Ok(Standardized { points: z, means, sds, flat })
}
