use rand::Rng as _;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rng::{stream, Purpose};

pub const RESTARTS: usize = 10;
const MAX_ROUNDS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    /// Cluster index per point. The cluster holding point 0 is cluster 0.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from the given centroids until assignments settle.
fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Clustering {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ROUNDS {
        let mut changed = false;
        for (p, slot) in points.iter().zip(assignment.iter_mut()) {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centroids[a]).total_cmp(&dist2(p, &centroids[b])))
                .expect("k > 0");
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points.iter().zip(&assignment).map(|(p, &c)| dist2(p, &centroids[c])).sum();
    Clustering {
        assignment,
        centroids,
        inertia,
    }
}

/// k-means with `restarts` seeded k-means++ initializations; the lowest
/// inertia wins, the earliest restart on ties.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<Clustering> {
    if k == 0 || points.len() < k {
        return Err(invalid(format!("k-means needs at least k = {k} > 0 points, got {}", points.len())));
    }
    if restarts == 0 {
        return Err(invalid("k-means needs at least one restart"));
    }
    let mut rng = stream(seed, Purpose::Cluster);
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts {
        let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
        while centroids.len() < k {
            let weights: Vec<f64> = points
                .iter()
                .map(|p| centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = weights.iter().sum();
            let pick = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                weights
                    .iter()
                    .position(|&w| {
                        target -= w;
                        target < 0.0
                    })
                    .unwrap_or(points.len() - 1)
            } else {
                rng.random_range(0..points.len())
            };
            centroids.push(points[pick].clone());
        }
        let run = lloyd(points, centroids);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("restarts > 0");
    canonicalize(&mut best);
    Ok(best)
}

/// Renumbers clusters by first appearance.
fn canonicalize(c: &mut Clustering) {
    let k = c.centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &a in &c.assignment {
        if map[a] == usize::MAX {
            map[a] = next;
            next += 1;
        }
    }
    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
        *m = next;
        next += 1;
    }
    let mut centroids = vec![Vec::new(); k];
    for (old, &new) in map.iter().enumerate() {
        centroids[new] = c.centroids[old].clone();
    }
    c.centroids = centroids;
    c.assignment.iter_mut().for_each(|a| *a = map[*a]);
}

pub fn kmeans2(points: &[Vec<f64>], seed: u64) -> Result<Clustering> {
    kmeans(points, 2, RESTARTS, seed)
}
