use serde::Serialize;

use crate::error::{invalid, Result};
use crate::tensor::Tensor;

/// Stop when successive eigenvalue estimates differ by less than this
/// (relative) and the direction has settled.
pub const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 100_000;
/// Eigenvalues below `RANK_FLOOR · trace` count as zero.
const RANK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    /// `[N × components]`, row-major.
    pub coords: Vec<Vec<f64>>,
    /// One unit vector of length `D` per component.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Each eigenvalue over the total variance.
    pub explained: Vec<f64>,
}

impl Projection {
    pub fn components(&self) -> usize {
        self.basis.len()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Population covariance of the rows of `x` (`D × D`) and the column means.
fn covariance(x: &Tensor<f64>) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let mut means = vec![0.0; d];
    for r in 0..n {
        for (m, v) in means.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for r in 0..n {
        for (c, (v, m)) in centered.iter_mut().zip(x.row(r).iter().zip(&means)) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * d..(i + 1) * d];
            for j in 0..d {
                row[j] += ci * centered[j];
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n as f64);
    (cov, means)
}

fn apply(cov: &[f64], v: &[f64]) -> Vec<f64> {
    cov.chunks(v.len()).map(|row| dot(row, v)).collect()
}

/// Top-`k` principal components of the rows of `x` by power iteration on
/// the covariance, deflating each converged component before the next.
/// Returns fewer than `k` components when the data has lower rank.
pub fn pca_project(x: &Tensor<f64>, k: usize) -> Result<Projection> {
    if x.shape().len() != 2 {
        return Err(invalid("pca_project expects a matrix"));
    }
    let (n, d) = (x.rows(), x.cols());
    if k == 0 || n < k {
        return Err(invalid(format!("need at least k = {k} > 0 rows, got {n}")));
    }
    let (mut cov, means) = covariance(x);
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut eigenvalues = Vec::new();
    for comp in 0..k.min(d) {
        if trace <= 0.0 {
            break;
        }
        // Deterministic start, kept orthogonal to the earlier components.
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + ((i * 7 + comp * 13) % 11) as f64 / 10.0).collect();
        orthogonalize(&mut v, &basis);
        normalize(&mut v);
        let mut lambda = dot(&v, &apply(&cov, &v));
        for _ in 0..MAX_ITERATIONS {
            let mut w = apply(&cov, &v);
            orthogonalize(&mut w, &basis);
            if normalize(&mut w) == 0.0 {
                break;
            }
            let next = dot(&w, &apply(&cov, &w));
            let moved = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            let settled = (next - lambda).abs() <= TOLERANCE * next.abs().max(f64::MIN_POSITIVE);
            lambda = next;
            if settled && moved < TOLERANCE {
                break;
            }
        }
        if lambda <= RANK_FLOOR * trace {
            break;
        }
        // Sign convention: largest-magnitude coordinate positive.
        let pivot = (0..d).fold(0, |b, i| if v[i].abs() > v[b].abs() { i } else { b });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] -= lambda * v[i] * v[j];
            }
        }
        basis.push(v);
        eigenvalues.push(lambda);
    }
    let coords = (0..n)
        .map(|r| {
            let centered: Vec<f64> = x.row(r).iter().zip(&means).map(|(a, m)| a - m).collect();
            basis.iter().map(|b| dot(&centered, b)).collect()
        })
        .collect();
    let explained = eigenvalues.iter().map(|l| if trace > 0.0 { l / trace } else { 0.0 }).collect();
    Ok(Projection {
        coords,
        basis,
        eigenvalues,
        explained,
    })
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    }
}
