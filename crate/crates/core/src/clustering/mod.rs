//! Hard partitions of feature subsets.
//!
//! Two engines are provided: K-means with k-means++ seeding and restarts, and
//! Gustafson–Kessel fuzzy clustering hardened by largest membership. Both work
//! on z-scored columns of the selected subset.

mod gk;
mod kmeans;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureSubset};
use crate::error::{Error, Result};

pub use gk::{gk_cluster, gk_points, GkFit, GkOptions};
pub use kmeans::{kmeans, kmeans_points, KMeansFit, KMeansOptions};

pub(crate) use gk::partition_from_gk as gk_partition;
pub(crate) use kmeans::partition_from_fit as kmeans_partition;

/// Row-major point cloud, typically standardized columns of a subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 || data.len() != n * p {
            return Err(Error::Argument(format!(
                "point buffer of length {} does not match {n}x{p}",
                data.len()
            )));
        }
        Ok(Self { n, p, data })
    }

    /// Raw (unscaled) columns of `subset`.
    pub fn raw(ds: &Dataset, subset: &FeatureSubset) -> Result<Self> {
        subset.check_dim(ds.dim())?;
        Self::new(ds.len(), subset.len(), ds.subset_rows(subset))
    }

    /// Columns of `subset` shifted to zero mean and scaled to unit (population)
    /// variance. Constant columns are only centered.
    pub fn standardized(ds: &Dataset, subset: &FeatureSubset) -> Result<Self> {
        let mut pts = Self::raw(ds, subset)?;
        pts.standardize();
        Ok(pts)
    }

    pub fn standardize(&mut self) {
        let n = self.n as f64;
        for j in 0..self.p {
            let mean = self.column(j).sum::<f64>() / n;
            let var = self.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..self.n {
                let v = &mut self.data[i * self.p + j];
                *v = (*v - mean) / scale;
            }
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(j).step_by(self.p).copied()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mirror image `x -> -x`.
    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            p: self.p,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }
}

#[inline(always)]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    #[inline(always)]
    fn fixed<const P: usize>(a: &[f64], b: &[f64]) -> Option<f64> {
        let a: &[f64; P] = a.try_into().ok()?;
        let b: &[f64; P] = b.try_into().ok()?;
        Some((0..P).map(|j| (a[j] - b[j]) * (a[j] - b[j])).sum())
    }
    // Feature subsets are small; fixed lengths let the loop unroll.
    match a.len() {
        2 => fixed::<2>(a, b),
        3 => fixed::<3>(a, b),
        4 => fixed::<4>(a, b),
        _ => None,
    }
    .unwrap_or_else(|| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Fitted parameters behind a partition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterParams {
    /// K×p centers in the standardized space.
    pub centers: Option<Array2<f64>>,
    /// N×K fuzzy memberships (fuzzy engine only).
    pub memberships: Option<Array2<f64>>,
    /// Per-cluster volume-normalized covariances, each p×p with determinant 1.
    pub covariances: Option<Vec<Array2<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Kmeans,
    Gk,
}

/// Non-fatal conditions met while fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    pub converged: bool,
    /// A cluster covariance was regularized to stay invertible.
    pub regularized: bool,
}

/// Hard assignment of every event to a cluster id in `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignments: Vec<usize>,
    k: usize,
    subset: FeatureSubset,
    objective: f64,
    seed: u64,
    engine: Engine,
    flags: FitFlags,
    params: ClusterParams,
}

impl Partition {
    /// Builds a partition from 1-based ids, rejecting out-of-range ids and empty clusters.
    pub fn new(assignments: Vec<usize>, k: usize, subset: FeatureSubset) -> Result<Self> {
        check_assignments(&assignments, k)?;
        Ok(Self {
            assignments,
            k,
            subset,
            objective: f64::NAN,
            seed: 0,
            engine: Engine::Kmeans,
            flags: FitFlags::default(),
            params: ClusterParams::default(),
        })
    }

    /// Partition over a placeholder one-column subset; handy when only the labels matter.
    pub fn from_labels(assignments: Vec<usize>, k: usize) -> Result<Self> {
        Self::new(assignments, k, FeatureSubset::all(1))
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fitted(
        assignments: Vec<usize>,
        k: usize,
        subset: FeatureSubset,
        objective: f64,
        seed: u64,
        engine: Engine,
        flags: FitFlags,
        params: ClusterParams,
    ) -> Self {
        Self {
            assignments,
            k,
            subset,
            objective,
            seed,
            engine,
            flags,
            params,
        }
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subset(&self) -> &FeatureSubset {
        &self.subset
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn flags(&self) -> FitFlags {
        self.flags
    }

    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    /// Cluster sizes indexed by `id - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignments {
            sizes[c - 1] += 1;
        }
        sizes
    }

    pub fn to_record(&self) -> PartitionRecord {
        PartitionRecord {
            subset: self.subset.clone(),
            k: self.k,
            engine: self.engine,
            seed: self.seed,
            objective: self.objective,
            assignments: self.assignments.clone(),
        }
    }
}

/// JSON form of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub subset: FeatureSubset,
    pub k: usize,
    pub engine: Engine,
    pub seed: u64,
    pub objective: f64,
    pub assignments: Vec<usize>,
}

pub(crate) fn check_assignments(assignments: &[usize], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Argument("k must be positive".into()));
    }
    let mut sizes = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        if c == 0 || c > k {
            return Err(Error::Argument(format!(
                "cluster id {c} at row {} outside 1..={k}",
                i + 1
            )));
        }
        sizes[c - 1] += 1;
    }
    match sizes.iter().position(|&s| s == 0) {
        Some(c) => Err(Error::EmptyCluster { k, cluster: c + 1 }),
        None => Ok(()),
    }
}

/// Largest-membership assignment (1-based); ties go to the lowest id.
pub fn harden(params: &ClusterParams) -> Result<Vec<usize>> {
    let memberships = params
        .memberships
        .as_ref()
        .ok_or_else(|| Error::State("no memberships to harden".into()))?;
    Ok(harden_rows(memberships))
}

pub(crate) fn harden_rows(memberships: &Array2<f64>) -> Vec<usize> {
    memberships
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &u) in row.iter().enumerate() {
                if u > row[best] {
                    best = j;
                }
            }
            best + 1
        })
        .collect()
}

pub(crate) fn validate_k(k: usize, n: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Argument(format!("k={k} exceeds {n} points")));
    }
    Ok(())
}
