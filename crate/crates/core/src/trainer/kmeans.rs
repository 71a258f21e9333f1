use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

const MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    /// Sorted lexicographically.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, dist2(x, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = dist2(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d: Vec<f64> = points.iter().map(|x| dist2(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d.iter().rposition(|&w| w > 0.0).expect("positive total");
            for (i, &w) in d.iter().enumerate() {
                acc += w;
                if w > 0.0 && u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
        for (di, x) in d.iter_mut().zip(points) {
            *di = di.min(dist2(x, &points[pick]));
        }
    }
    centroids
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Lloyd's algorithm with k-means++ seeding, keeping the SSE trace.
pub fn kmeans_with_history(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KmeansResult> {
    if k == 0 {
        return invalid("k must be positive");
    }
    if points.len() < k {
        return invalid(format!("cannot form {k} clusters from {} points", points.len()));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
        return invalid("points must be finite vectors of one nonzero dimension");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    let mut sse_history = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        let mut changed = false;
        let mut sse = 0.0;
        for (i, x) in points.iter().enumerate() {
            let (j, d) = nearest(x, &centroids);
            changed |= assign[i] != j;
            assign[i] = j;
            sse += d;
        }
        sse_history.push(sse);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &j) in points.iter().zip(&assign) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // re-seed at the point worst served by the current centroids
                let far = (0..points.len())
                    .map(|i| (i, nearest(&points[i], &centroids).1))
                    .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
                centroids[j] = points[far.0].clone();
            }
        }
    }
    centroids.sort_by(|a, b| lex_cmp(a, b));
    Ok(KmeansResult {
        centroids,
        sse_history,
        iterations,
    })
}

/// `k` cluster centres of `actions`, sorted lexicographically.
pub fn kmeans_actions(actions: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(kmeans_with_history(actions, k, seed)?.centroids)
}
