//! Internal (shape-based) validity indices: Silhouette, Davies–Bouldin and
//! Calinski–Harabasz, all with Euclidean geometry.

use super::{CviKind, CviScore};
use crate::clustering::{Partition, Points};
use crate::error::{Error, Result};

fn check(points: &Points, labels: &[usize], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Unsupported(
            "shape indices need at least two clusters".into(),
        ));
    }
    if labels.len() != points.len() {
        return Err(Error::Argument(format!(
            "{} labels for {} points",
            labels.len(),
            points.len()
        )));
    }
    crate::clustering::check_assignments(labels, k)
}

fn centroids(points: &Points, labels: &[usize], k: usize) -> (Vec<f64>, Vec<usize>) {
    let p = points.dim();
    let mut sums = vec![0.0; k * p];
    let mut counts = vec![0usize; k];
    for (x, &c) in points.rows().zip(labels) {
        counts[c - 1] += 1;
        for (s, v) in sums[(c - 1) * p..c * p].iter_mut().zip(x) {
            *s += v;
        }
    }
    for c in 0..k {
        let inv = 1.0 / counts[c].max(1) as f64;
        sums[c * p..(c + 1) * p].iter_mut().for_each(|s| *s *= inv);
    }
    (sums, counts)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    crate::clustering::squared_distance(a, b).sqrt()
}

/// Davies–Bouldin index (lower is better). Coincident centroids give `+∞`.
pub fn davies_bouldin_value(points: &Points, labels: &[usize], k: usize) -> Result<f64> {
    check(points, labels, k)?;
    let p = points.dim();
    let (centers, counts) = centroids(points, labels, k);
    let mut scatter = vec![0.0; k];
    for (x, &c) in points.rows().zip(labels) {
        scatter[c - 1] += distance(x, &centers[(c - 1) * p..c * p]);
    }
    for c in 0..k {
        scatter[c] /= counts[c] as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            let d = distance(&centers[i * p..(i + 1) * p], &centers[j * p..(j + 1) * p]);
            let ratio = if d > 0.0 {
                (scatter[i] + scatter[j]) / d
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Calinski–Harabasz index (higher is better). Zero within-cluster scatter gives `+∞`.
pub fn calinski_harabasz_value(points: &Points, labels: &[usize], k: usize) -> Result<f64> {
    check(points, labels, k)?;
    let n = points.len();
    let p = points.dim();
    let (centers, counts) = centroids(points, labels, k);
    let mut mean = vec![0.0; p];
    for x in points.rows() {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let between: f64 = (0..k)
        .map(|c| {
            counts[c] as f64
                * crate::clustering::squared_distance(&centers[c * p..(c + 1) * p], &mean)
        })
        .sum();
    let within: f64 = points
        .rows()
        .zip(labels)
        .map(|(x, &c)| crate::clustering::squared_distance(x, &centers[(c - 1) * p..c * p]))
        .sum();
    if within <= 0.0 || n == k {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Mean silhouette width (higher is better). Singleton clusters score 0.
pub fn silhouette_value(points: &Points, labels: &[usize], k: usize) -> Result<f64> {
    check(points, labels, k)?;
    Ok(silhouette_many(points, &[(labels, k)], None)[0])
}

/// Sum of `values[idx]` over `idx`, with independent partial sums.
fn gather_sum(values: &[f64], idx: &[u32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let chunks = idx.chunks_exact(8);
    let rest = chunks.remainder();
    for chunk in chunks {
        for (a, &j) in acc.iter_mut().zip(chunk) {
            *a += values[j as usize];
        }
    }
    let mut total: f64 = acc.iter().sum();
    for &j in rest {
        total += values[j as usize];
    }
    total
}

/// Mean silhouette of several labelings of the same points, sharing the
/// pairwise distances.
///
/// With `sample = Some(m)` and `m < N`, the silhouette is that of `m` points
/// taken at evenly spaced row indices (distances restricted to the sample).
/// Labelings must be valid 1-based assignments.
pub fn silhouette_many(
    points: &Points,
    labelings: &[(&[usize], usize)],
    sample: Option<usize>,
) -> Vec<f64> {
    let n = points.len();
    let p = points.dim();
    let rows: Vec<usize> = match sample {
        Some(m) if m >= 2 && m < n => (0..m).map(|i| i * n / m).collect(),
        _ => (0..n).collect(),
    };
    let m = rows.len();
    // Column-major copy of the sampled rows so the distance loop vectorizes.
    let mut columns = vec![0.0; p * m];
    for (s, &r) in rows.iter().enumerate() {
        for j in 0..p {
            columns[j * m + s] = points.row(r)[j];
        }
    }

    struct Grouping {
        /// Sample positions grouped by cluster.
        order: Vec<u32>,
        /// Range of `order` belonging to each cluster.
        bounds: Vec<(usize, usize)>,
        /// Cluster (0-based) of each sample position.
        label: Vec<usize>,
    }
    let groupings: Vec<Grouping> = labelings
        .iter()
        .map(|&(labels, k)| {
            let label: Vec<usize> = rows.iter().map(|&r| labels[r] - 1).collect();
            let mut counts = vec![0usize; k];
            for &c in &label {
                counts[c] += 1;
            }
            let mut bounds = Vec::with_capacity(k);
            let mut start = 0;
            for &c in &counts {
                bounds.push((start, start + c));
                start += c;
            }
            let mut cursor: Vec<usize> = bounds.iter().map(|b| b.0).collect();
            let mut order = vec![0u32; m];
            for (s, &c) in label.iter().enumerate() {
                order[cursor[c]] = s as u32;
                cursor[c] += 1;
            }
            Grouping {
                order,
                bounds,
                label,
            }
        })
        .collect();

    let mut totals = vec![0.0; labelings.len()];
    let mut dist = vec![0.0; m];
    let mut xi = vec![0.0; p];
    for i in 0..m {
        for j in 0..p {
            xi[j] = columns[j * m + i];
        }
        dist.iter_mut().for_each(|d| *d = 0.0);
        for j in 0..p {
            let col = &columns[j * m..(j + 1) * m];
            let c = xi[j];
            for (d, &v) in dist.iter_mut().zip(col) {
                let diff = v - c;
                *d += diff * diff;
            }
        }
        dist.iter_mut().for_each(|d| *d = d.sqrt());

        for (g, total) in groupings.iter().zip(totals.iter_mut()) {
            let own = g.label[i];
            let (lo, hi) = g.bounds[own];
            let own_size = hi - lo;
            if own_size <= 1 {
                continue;
            }
            let a = gather_sum(&dist, &g.order[lo..hi]) / (own_size - 1) as f64;
            let mut b = f64::INFINITY;
            for (c, &(lo, hi)) in g.bounds.iter().enumerate() {
                if c == own || hi == lo {
                    continue;
                }
                b = b.min(gather_sum(&dist, &g.order[lo..hi]) / (hi - lo) as f64);
            }
            if !b.is_finite() {
                continue;
            }
            let denom = a.max(b);
            if denom > 0.0 {
                *total += (b - a) / denom;
            }
        }
    }
    totals.into_iter().map(|t| t / m as f64).collect()
}

fn score(kind: CviKind, p: &Partition, value: f64) -> CviScore {
    CviScore::new(kind, p.k(), p.subset().clone(), value)
}

pub fn silhouette(points: &Points, p: &Partition) -> Result<CviScore> {
    Ok(score(
        CviKind::Silhouette,
        p,
        silhouette_value(points, p.assignments(), p.k())?,
    ))
}

pub fn davies_bouldin(points: &Points, p: &Partition) -> Result<CviScore> {
    Ok(score(
        CviKind::DaviesBouldin,
        p,
        davies_bouldin_value(points, p.assignments(), p.k())?,
    ))
}

pub fn calinski_harabasz(points: &Points, p: &Partition) -> Result<CviScore> {
    Ok(score(
        CviKind::CalinskiHarabasz,
        p,
        calinski_harabasz_value(points, p.assignments(), p.k())?,
    ))
}
