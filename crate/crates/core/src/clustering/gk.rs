//! Gustafson–Kessel fuzzy clustering.
//!
//! Fuzzy c-means in which every cluster measures distance with its own
//! Mahalanobis norm, built from the fuzzy covariance rescaled to unit
//! determinant so that clusters can change shape but not volume.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_assignments, harden_rows, squared_distance, validate_k, ClusterParams, Engine, FitFlags,
    Partition, Points,
};
use crate::dataset::{Dataset, FeatureSubset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkOptions {
    /// Fuzziness exponent `m > 1`.
    pub fuzziness: f64,
    /// Stop when the largest membership change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Independent seeded starts; the one with the lowest objective wins.
    pub restarts: usize,
}

impl Default for GkOptions {
    fn default() -> Self {
        Self {
            fuzziness: 2.0,
            tol: 1e-6,
            max_iter: 300,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GkFit {
    pub memberships: Array2<f64>,
    pub centers: Array2<f64>,
    /// Unit-determinant covariances.
    pub covariances: Vec<Array2<f64>>,
    /// 1-based hardened ids.
    pub assignments: Vec<usize>,
    /// Σ u^m · D² at the final iterate.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub regularized: bool,
}

/// Relative determinant below which a covariance is treated as singular.
const SINGULAR_RATIO: f64 = 1e-12;
const REGULARIZATION: f64 = 1e-8;
/// Floor on squared distances so memberships stay finite.
const MIN_DISTANCE: f64 = 1e-300;

struct Metric {
    /// Unit-determinant covariance.
    covariance: DMatrix<f64>,
    /// Inverse of `covariance`.
    inverse: DMatrix<f64>,
    regularized: bool,
}

fn cluster_metric(scatter: DMatrix<f64>) -> Metric {
    let p = scatter.nrows();
    let scale = (scatter.trace() / p as f64).max(f64::MIN_POSITIVE);
    let mut cov = scatter;
    let mut regularized = false;
    let singular = |m: &DMatrix<f64>| {
        let det = m.determinant();
        !det.is_finite()
            || det <= 0.0
            || det / scale.powi(p as i32) < SINGULAR_RATIO
            || m.clone().cholesky().is_none()
    };
    if singular(&cov) {
        let eps = REGULARIZATION * scale;
        for i in 0..p {
            cov[(i, i)] += eps;
        }
        regularized = true;
        // A collapsed cluster (all members coincide) needs the identity metric.
        if singular(&cov) {
            cov = DMatrix::identity(p, p) * scale;
        }
    }
    let det = cov.determinant();
    let normalized = cov / det.powf(1.0 / p as f64);
    let inverse = normalized
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::identity(p, p));
    Metric {
        covariance: normalized,
        inverse,
        regularized,
    }
}

fn mahalanobis(x: &[f64], center: &[f64], inverse: &DMatrix<f64>, diff: &mut [f64]) -> f64 {
    let p = x.len();
    for j in 0..p {
        diff[j] = x[j] - center[j];
    }
    let mut total = 0.0;
    for a in 0..p {
        let mut row = 0.0;
        for b in 0..p {
            row += inverse[(a, b)] * diff[b];
        }
        total += diff[a] * row;
    }
    total
}

/// Standard fuzzy update from squared distances of one point to all clusters.
fn memberships_from_distances(d2: &[f64], m: f64, out: &mut [f64]) {
    if let Some(zero) = d2.iter().position(|&d| d <= MIN_DISTANCE) {
        // The point sits on a prototype: give it fully to the first such cluster.
        out.iter_mut().for_each(|u| *u = 0.0);
        out[zero] = 1.0;
        return;
    }
    let exponent = 1.0 / (m - 1.0);
    for i in 0..d2.len() {
        let denom: f64 = d2.iter().map(|&dj| (d2[i] / dj).powf(exponent)).sum();
        out[i] = 1.0 / denom;
    }
}

/// Fuzzy memberships from k-means++ style prototypes and Euclidean distance.
fn initial_memberships(points: &Points, k: usize, m: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let p = points.dim();
    let centers = super::kmeans::plus_plus_centers(points, k, rng);
    let mut u = Array2::zeros((points.len(), k));
    let mut d2 = vec![0.0; k];
    let mut row = vec![0.0; k];
    for (i, x) in points.rows().enumerate() {
        for c in 0..k {
            d2[c] = squared_distance(x, &centers[c * p..(c + 1) * p]).max(MIN_DISTANCE);
        }
        memberships_from_distances(&d2, m, &mut row);
        for c in 0..k {
            u[[i, c]] = row[c];
        }
    }
    u
}

fn gk_single(points: &Points, k: usize, opts: &GkOptions, rng: &mut ChaCha8Rng) -> GkFit {
    let n = points.len();
    let p = points.dim();
    let m = opts.fuzziness;
    let mut u = initial_memberships(points, k, m, rng);
    let mut centers = Array2::<f64>::zeros((k, p));
    let mut metrics: Vec<Metric> = Vec::with_capacity(k);
    let mut d2 = Array2::<f64>::zeros((n, k));
    let mut converged = false;
    let mut regularized = false;
    let mut iterations = 0;
    let mut diff = vec![0.0; p];
    let mut row = vec![0.0; k];
    let mut new_u = u.clone();

    while iterations < opts.max_iter {
        iterations += 1;
        metrics.clear();
        for c in 0..k {
            let weights: Vec<f64> = (0..n).map(|i| u[[i, c]].powf(m)).collect();
            let total: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            let mut center = vec![0.0; p];
            for (w, x) in weights.iter().zip(points.rows()) {
                for j in 0..p {
                    center[j] += w * x[j];
                }
            }
            center.iter_mut().for_each(|v| *v /= total);
            let mut scatter = DMatrix::<f64>::zeros(p, p);
            for (w, x) in weights.iter().zip(points.rows()) {
                for a in 0..p {
                    let da = x[a] - center[a];
                    for b in a..p {
                        scatter[(a, b)] += w * da * (x[b] - center[b]);
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    scatter[(a, b)] = scatter[(b, a)];
                }
            }
            scatter /= total;
            let metric = cluster_metric(scatter);
            regularized |= metric.regularized;
            metrics.push(metric);
            for j in 0..p {
                centers[[c, j]] = center[j];
            }
        }

        let mut max_change: f64 = 0.0;
        for (i, x) in points.rows().enumerate() {
            for c in 0..k {
                let center = centers.row(c);
                let center = center.as_slice().expect("contiguous row");
                d2[[i, c]] = mahalanobis(x, center, &metrics[c].inverse, &mut diff).max(0.0);
            }
            let di = d2.row(i).to_vec();
            memberships_from_distances(&di, m, &mut row);
            for c in 0..k {
                max_change = max_change.max((row[c] - u[[i, c]]).abs());
                new_u[[i, c]] = row[c];
            }
        }
        std::mem::swap(&mut u, &mut new_u);
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    let objective = u
        .iter()
        .zip(d2.iter())
        .map(|(uik, dik)| uik.powf(m) * dik)
        .sum();
    let covariances = metrics
        .iter()
        .map(|mt| Array2::from_shape_fn((p, p), |(a, b)| mt.covariance[(a, b)]))
        .collect();
    GkFit {
        assignments: harden_rows(&u),
        memberships: u,
        centers,
        covariances,
        objective,
        iterations,
        converged,
        regularized,
    }
}

/// Gustafson–Kessel on a prepared point cloud.
pub fn gk_points(points: &Points, k: usize, opts: &GkOptions, seed: u64) -> Result<GkFit> {
    validate_k(k, points.len())?;
    if !(opts.fuzziness > 1.0) {
        return Err(Error::Argument(format!(
            "fuzziness must exceed 1, got {}",
            opts.fuzziness
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Argument(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    if opts.max_iter == 0 || opts.restarts == 0 {
        return Err(Error::Argument(
            "max_iter and restarts must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<GkFit> = None;
    for _ in 0..opts.restarts {
        let fit = gk_single(points, k, opts, &mut rng);
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    let best = best.expect("restarts >= 1");
    if !best.converged {
        log::warn!(
            "gustafson-kessel did not converge within {} iterations (k={k})",
            opts.max_iter
        );
    }
    check_assignments(&best.assignments, k)?;
    Ok(best)
}

/// Gustafson–Kessel partition of the z-scored `subset` columns.
pub fn gk_cluster(
    ds: &Dataset,
    subset: &FeatureSubset,
    k: usize,
    opts: &GkOptions,
    seed: u64,
) -> Result<Partition> {
    let points = Points::standardized(ds, subset)?;
    let fit = gk_points(&points, k, opts, seed)?;
    Ok(partition_from_gk(fit, k, subset.clone(), seed))
}

pub(crate) fn partition_from_gk(
    fit: GkFit,
    k: usize,
    subset: FeatureSubset,
    seed: u64,
) -> Partition {
    Partition::fitted(
        fit.assignments,
        k,
        subset,
        fit.objective,
        seed,
        Engine::Gk,
        FitFlags {
            converged: fit.converged,
            regularized: fit.regularized,
        },
        ClusterParams {
            centers: Some(fit.centers),
            memberships: Some(fit.memberships),
            covariances: Some(fit.covariances),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{harden, kmeans_points, KMeansOptions};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> Points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut data = Vec::new();
        for c in 0..2 {
            for _ in 0..20 {
                data.push(10.0 * c as f64 + noise.sample(&mut rng));
                data.push(noise.sample(&mut rng));
            }
        }
        Points::new(40, 2, data).unwrap()
    }

    fn det(m: &Array2<f64>) -> f64 {
        let p = m.nrows();
        DMatrix::from_fn(p, p, |a, b| m[[a, b]]).determinant()
    }

    #[test]
    fn separated_blobs_agree_with_kmeans() {
        let mut pts = blobs(5);
        pts.standardize();
        let gk = gk_points(&pts, 2, &GkOptions::default(), 11).unwrap();
        let km = kmeans_points(&pts, 2, &KMeansOptions::default(), 11).unwrap();
        let same = gk.assignments == km.assignments;
        let swapped = gk
            .assignments
            .iter()
            .zip(&km.assignments)
            .all(|(a, b)| a != b);
        assert!(same || swapped);
        assert!(gk.converged);
    }

    #[test]
    fn memberships_normalized_and_volumes_unit() {
        let mut pts = blobs(8);
        pts.standardize();
        let fit = gk_points(&pts, 3, &GkOptions::default(), 2).unwrap();
        for row in fit.memberships.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            let k = row.len() as f64;
            assert!(row.iter().cloned().fold(0.0, f64::max) >= 1.0 / k);
        }
        for cov in &fit.covariances {
            assert!((det(cov) - 1.0).abs() < 1e-6);
            assert!((cov - &cov.t()).iter().all(|v| v.abs() < 1e-12));
        }
        let params = ClusterParams {
            memberships: Some(fit.memberships.clone()),
            ..ClusterParams::default()
        };
        assert_eq!(harden(&params).unwrap(), fit.assignments);
    }

    #[test]
    fn degenerate_subset_is_regularized() {
        // Second column is an exact copy of the first: every covariance is singular.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut data = Vec::new();
        for i in 0..30 {
            let v = if i < 15 { 0.0 } else { 5.0 } + rng.random::<f64>();
            data.push(v);
            data.push(v);
        }
        let pts = Points::new(30, 2, data).unwrap();
        let fit = gk_points(&pts, 2, &GkOptions::default(), 3).unwrap();
        assert!(fit.regularized);
        assert!(fit.memberships.iter().all(|u| u.is_finite()));
        for cov in &fit.covariances {
            assert!((det(cov) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn option_checks() {
        let pts = blobs(1);
        let bad_m = GkOptions {
            fuzziness: 1.0,
            ..GkOptions::default()
        };
        assert!(gk_points(&pts, 2, &bad_m, 0).is_err());
        let bad_tol = GkOptions {
            tol: 0.0,
            ..GkOptions::default()
        };
        assert!(gk_points(&pts, 2, &bad_tol, 0).is_err());
        assert!(gk_points(&pts, 1, &GkOptions::default(), 0).is_err());
    }

    #[test]
    fn capped_iterations_report_non_convergence() {
        let mut pts = blobs(4);
        pts.standardize();
        let opts = GkOptions {
            max_iter: 1,
            tol: 1e-15,
            ..GkOptions::default()
        };
        let fit = gk_points(&pts, 2, &opts, 0).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }
}
