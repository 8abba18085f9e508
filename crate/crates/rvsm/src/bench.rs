//! Query timing over a ladder of query counts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvsm_core::multiclass::query_map;
use rvsm_core::{Point3, SemanticMapModel};

use crate::Result;

/// Timing rounds continue until every size has accumulated this much time.
const MIN_SECONDS: f64 = 0.25;
const MIN_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchPoint {
    pub queries: usize,
    /// Timed batches.
    pub runs: usize,
    /// Fastest single pass over the queries, in seconds.
    pub seconds: f64,
    pub per_query: f64,
}

/// Uniform query points in the relevance vectors' bounding box, padded by one length scale.
pub fn random_queries(map: &SemanticMapModel, n: usize, seed: u64) -> Vec<Point3> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for rv in map.binary_models.iter().flat_map(|m| &m.relevance_vectors) {
        for k in 0..3 {
            lo[k] = lo[k].min(rv[k]);
            hi[k] = hi[k].max(rv[k]);
        }
    }
    if lo[0] > hi[0] {
        lo = [0.0; 3];
        hi = [1.0; 3];
    }
    let pad = map.kernel.length_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| std::array::from_fn(|k| rng.random_range(lo[k] - pad..=hi[k] + pad)))
        .collect()
}

/// Best-of-several timing of [`query_map`] at every size.
///
/// Sizes are interleaved within each round so slow drift of the machine hits
/// all of them alike, and small sizes are repeated within a batch so every
/// batch covers about as many queries as the largest size.
pub fn bench_queries(map: &SemanticMapModel, sizes: &[usize], seed: u64) -> Result<Vec<BenchPoint>> {
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let sets: Vec<Vec<Point3>> = sizes.iter().map(|&n| random_queries(map, n, seed)).collect();
    let reps: Vec<usize> = sizes.iter().map(|&n| largest.div_ceil(n.max(1)).max(1)).collect();
    let mut best = vec![f64::INFINITY; sizes.len()];
    let mut total = vec![0.0; sizes.len()];
    let mut rounds = 0;
    while rounds < MIN_ROUNDS || total.iter().any(|&t| t < MIN_SECONDS) {
        for (k, queries) in sets.iter().enumerate() {
            let start = Instant::now();
            for _ in 0..reps[k] {
                std::hint::black_box(query_map(map, queries)?);
            }
            let t = start.elapsed().as_secs_f64();
            best[k] = best[k].min(t / reps[k] as f64);
            total[k] += t;
        }
        rounds += 1;
    }
    Ok(sizes
        .iter()
        .zip(&best)
        .map(|(&n, &seconds)| BenchPoint { queries: n, runs: rounds, seconds, per_query: seconds / n.max(1) as f64 })
        .collect())
}

/// Largest relative deviation of per-query cost from the median cost.
pub fn linearity_deviation(points: &[BenchPoint]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut costs: Vec<f64> = points.iter().map(|p| p.per_query).collect();
    costs.sort_by(f64::total_cmp);
    let median = if costs.len() % 2 == 1 {
        costs[costs.len() / 2]
    } else {
        0.5 * (costs[costs.len() / 2 - 1] + costs[costs.len() / 2])
    };
    costs.iter().map(|c| (c / median - 1.0).abs()).fold(0.0, f64::max)
}
