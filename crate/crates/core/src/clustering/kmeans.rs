use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_assignments, squared_distance, validate_k, ClusterParams, Engine, FitFlags, Partition,
    Points,
};
use crate::dataset::{Dataset, FeatureSubset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    /// Lloyd iterations per restart.
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 300,
        }
    }
}

/// Result of the best restart.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// 1-based cluster ids.
    pub assignments: Vec<usize>,
    /// Row-major k×p centers.
    pub centers: Vec<f64>,
    /// Total within-cluster sum of squared Euclidean distances.
    pub objective: f64,
    /// Objective after each assignment step of the winning restart.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Restart index that won (first one on exact ties).
    pub restart: usize,
}

pub(super) fn plus_plus_centers(points: &Points, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len();
    let p = points.dim();
    let mut centers = Vec::with_capacity(k * p);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(points.row(first));
    let mut nearest: Vec<f64> = points
        .rows()
        .map(|x| squared_distance(x, points.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Rounding can walk past the end; fall back to the last point with weight.
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (d, x) in nearest.iter_mut().zip(points.rows()) {
            *d = d.min(squared_distance(x, &c));
        }
        centers.extend_from_slice(&c);
    }
    centers
}

/// Buffers reused across the assignment passes of one run.
struct Pass {
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl Pass {
    fn new(k: usize, p: usize) -> Self {
        Self {
            sums: vec![0.0; k * p],
            counts: vec![0; k],
        }
    }

    /// Assigns every point to its nearest center (lowest index on ties) and
    /// accumulates the member sums of the new assignment. Returns the
    /// objective against `centers` and whether any label changed.
    fn assign(&mut self, points: &Points, centers: &[f64], labels: &mut [usize]) -> (f64, bool) {
        // Constant small dimensions let the compiler unroll the distance loops.
        match points.dim() {
            1 => self.assign_dim(1, points.as_slice(), centers, labels),
            2 => self.assign_dim(2, points.as_slice(), centers, labels),
            3 => self.assign_dim(3, points.as_slice(), centers, labels),
            4 => self.assign_dim(4, points.as_slice(), centers, labels),
            p => self.assign_dim(p, points.as_slice(), centers, labels),
        }
    }

    #[inline(always)]
    fn assign_dim(
        &mut self,
        p: usize,
        data: &[f64],
        centers: &[f64],
        labels: &mut [usize],
    ) -> (f64, bool) {
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        self.counts.iter_mut().for_each(|c| *c = 0);
        let mut total = 0.0;
        let mut changed = false;
        for (x, label) in data.chunks_exact(p).zip(labels.iter_mut()) {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.chunks_exact(p).enumerate() {
                let mut d = 0.0;
                for j in 0..p {
                    let t = x[j] - center[j];
                    d += t * t;
                }
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *label != best {
                *label = best;
                changed = true;
            }
            total += best_d;
            self.counts[best] += 1;
            let sums = &mut self.sums[best * p..(best + 1) * p];
            for j in 0..p {
                sums[j] += x[j];
            }
        }
        (total, changed)
    }

    /// Moves each center to the mean of its members; empty clusters keep their center.
    fn update(&self, centers: &mut [f64], p: usize) {
        for (c, &count) in self.counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                for j in 0..p {
                    centers[c * p + j] = self.sums[c * p + j] * inv;
                }
            }
        }
    }
}

fn lloyd(points: &Points, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansFit {
    let p = points.dim();
    let mut centers = plus_plus_centers(points, k, rng);
    let mut labels = vec![usize::MAX; points.len()];
    let mut pass = Pass::new(k, p);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let (objective, changed) = pass.assign(points, &centers, &mut labels);
        trace.push(objective);
        if !changed {
            converged = true;
            break;
        }
        pass.update(&mut centers, p);
    }
    if !converged {
        // Report the objective of the final assignment against the final centers.
        let (objective, changed) = pass.assign(points, &centers, &mut labels);
        trace.push(objective);
        converged = !changed;
    }
    KMeansFit {
        assignments: labels.into_iter().map(|c| c + 1).collect(),
        centers,
        objective: *trace.last().expect("at least one iteration"),
        trace,
        converged,
        restart: 0,
    }
}

/// K-means on an already prepared point cloud.
///
/// Runs `opts.restarts` seeded k-means++ restarts and keeps the one with the
/// smallest objective. An empty cluster in that restart is an error.
pub fn kmeans_points(
    points: &Points,
    k: usize,
    opts: &KMeansOptions,
    seed: u64,
) -> Result<KMeansFit> {
    validate_k(k, points.len())?;
    if opts.restarts == 0 {
        return Err(Error::Argument("restarts must be at least 1".into()));
    }
    if opts.max_iter == 0 {
        return Err(Error::Argument("max_iter must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for restart in 0..opts.restarts {
        let mut fit = lloyd(points, k, opts.max_iter.max(1), &mut rng);
        fit.restart = restart;
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    let best = best.expect("restarts >= 1");
    check_assignments(&best.assignments, k)?;
    Ok(best)
}

/// K-means partition of the z-scored `subset` columns.
pub fn kmeans(
    ds: &Dataset,
    subset: &FeatureSubset,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Partition> {
    let points = Points::standardized(ds, subset)?;
    let opts = KMeansOptions {
        restarts,
        ..KMeansOptions::default()
    };
    let fit = kmeans_points(&points, k, &opts, seed)?;
    Ok(partition_from_fit(
        fit,
        k,
        subset.clone(),
        points.dim(),
        seed,
    ))
}

pub(crate) fn partition_from_fit(
    fit: KMeansFit,
    k: usize,
    subset: FeatureSubset,
    p: usize,
    seed: u64,
) -> Partition {
    let centers = Array2::from_shape_vec((k, p), fit.centers).expect("k×p centers");
    Partition::fitted(
        fit.assignments,
        k,
        subset,
        fit.objective,
        seed,
        Engine::Kmeans,
        FitFlags {
            converged: fit.converged,
            regularized: false,
        },
        ClusterParams {
            centers: Some(centers),
            ..ClusterParams::default()
        },
    )
}
