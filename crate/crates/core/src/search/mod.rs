//! Feature-subset × cluster-count sweeps.
//!
//! [`run_search`] clusters every `(subset, K)` combination once and scores it
//! with the onset criterion (and, on request, the shape indices used by the
//! voting baseline). Selection, onset histograms, voting and ground-truth
//! evaluation all work from the resulting [`SearchResult`].

mod eval;
mod histogram;
mod select;
mod subsets;
mod voting;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::clustering::{
    gk_points, kmeans_points, Engine, FitFlags, GkOptions, KMeansOptions, Partition, Points,
};
use crate::dataset::{Dataset, FeatureSubset};
use crate::error::{Error, Result};
use crate::validity::onset::{first_occurrences, score_onsets};
use crate::validity::shape::{calinski_harabasz_value, davies_bouldin_value, silhouette_many};
use crate::validity::{CviKind, CviScore, OnsetDistribution, PriorOnsets};

pub use eval::{evaluate_against_truth, RandSummary};
pub use histogram::{accumulate_histogram, ChangePointMatch, OnsetHistogram};
pub use select::{quantile, select_best, Selection};
pub use subsets::{binomial, enumerate_subsets, Subsets};
pub use voting::{select_voted, vote_per_k, voting_scheme, VoteOutcome, VoteWeights};

/// Shape indices computed alongside the onset score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeOptions {
    pub enabled: bool,
    /// Evaluate the silhouette on this many evenly spaced events instead of all.
    pub silhouette_sample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub subset_size: usize,
    pub restarts: usize,
    pub engine: Engine,
    pub fuzziness: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub selection: Selection,
    pub seed: u64,
    /// One prior gap distribution per K; when present the KL form is used.
    pub priors: Option<BTreeMap<usize, PriorOnsets>>,
    pub shape: ShapeOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 10,
            subset_size: 4,
            restarts: 5,
            engine: Engine::Kmeans,
            fuzziness: 2.0,
            tol: 1e-6,
            max_iter: 300,
            selection: Selection::TopN(20),
            seed: 0,
            priors: None,
            shape: ShapeOptions::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k_min < 2 {
            return Err(Error::Argument(format!(
                "k_min must be at least 2, got {}",
                self.k_min
            )));
        }
        if self.k_max < self.k_min {
            return Err(Error::Argument(format!(
                "empty K range [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if self.subset_size == 0 || self.subset_size > d {
            return Err(Error::Argument(format!(
                "subset size {} invalid for {d} features",
                self.subset_size
            )));
        }
        if self.restarts == 0 {
            return Err(Error::Argument("restarts must be at least 1".into()));
        }
        self.selection.validate()?;
        if let Some(priors) = &self.priors {
            for k in self.k_range() {
                match priors.get(&k) {
                    Some(prior) if prior.len() == k => {}
                    Some(prior) => {
                        return Err(Error::Argument(format!(
                            "prior for K={k} has {} entries",
                            prior.len()
                        )))
                    }
                    None => return Err(Error::Argument(format!("missing prior for K={k}"))),
                }
            }
        }
        Ok(())
    }

    pub fn k_range(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.k_max
    }

    pub fn k_count(&self) -> usize {
        self.k_max - self.k_min + 1
    }

    fn gk_options(&self) -> GkOptions {
        GkOptions {
            fuzziness: self.fuzziness,
            tol: self.tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
        }
    }

    fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            restarts: self.restarts,
            max_iter: self.max_iter,
        }
    }

    /// Seed of the `(subset, K)` task; independent of scheduling.
    pub fn task_seed(&self, subset: &FeatureSubset, k: usize) -> u64 {
        let mut h = splitmix(self.seed ^ 0x6f6e_7365_7463_7669);
        for &i in subset.indices() {
            h = splitmix(h ^ (i as u64 + 1));
        }
        splitmix(h ^ ((k as u64) << 32))
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Serializes non-finite floats as `null`.
pub(crate) fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeScores {
    #[serde(serialize_with = "finite_or_null")]
    pub silhouette: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub davies_bouldin: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub calinski_harabasz: f64,
}

impl ShapeScores {
    pub fn get(&self, kind: CviKind) -> Option<f64> {
        match kind {
            CviKind::Silhouette => Some(self.silhouette),
            CviKind::DaviesBouldin => Some(self.davies_bouldin),
            CviKind::CalinskiHarabasz => Some(self.calinski_harabasz),
            CviKind::OnsetEntropy | CviKind::OnsetKl => None,
        }
    }
}

/// One clustered and scored `(subset, K)` combination.
///
/// The partition itself is not kept; `seed` together with the subset, K and
/// the config reproduces it through [`materialize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchRecord {
    pub subset: FeatureSubset,
    pub k: usize,
    pub score: CviScore,
    /// Onsets on the original axis, ascending.
    pub onsets: Vec<f64>,
    pub objective: f64,
    pub seed: u64,
    pub flags: FitFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeScores>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub subset: FeatureSubset,
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub records: Vec<SearchRecord>,
    pub skipped: Vec<Skipped>,
    /// Combinations actually processed (`records + skipped`).
    pub attempted: usize,
    /// Combinations in the full sweep.
    pub planned: usize,
    /// False when the sweep was cancelled before every task ran.
    pub complete: bool,
}

impl SearchResult {
    pub fn records_for(&self, k: usize) -> impl Iterator<Item = &SearchRecord> {
        self.records.iter().filter(move |r| r.k == k)
    }

    pub fn ks(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.records.iter().map(|r| r.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// Scheduling knobs that do not influence results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
    pub cancel: Option<&'a AtomicBool>,
}

enum Outcome {
    Record(SearchRecord),
    Skip(Skipped),
}

struct Fitted {
    k: usize,
    seed: u64,
    assignments: Vec<usize>,
    objective: f64,
    flags: FitFlags,
}

fn fit(
    points: &Points,
    cfg: &SearchConfig,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, f64, FitFlags)> {
    match cfg.engine {
        Engine::Kmeans => {
            let fit = kmeans_points(points, k, &cfg.kmeans_options(), seed)?;
            Ok((
                fit.assignments,
                fit.objective,
                FitFlags {
                    converged: fit.converged,
                    regularized: false,
                },
            ))
        }
        Engine::Gk => {
            let fit = gk_points(points, k, &cfg.gk_options(), seed)?;
            Ok((
                fit.assignments,
                fit.objective,
                FitFlags {
                    converged: fit.converged,
                    regularized: fit.regularized,
                },
            ))
        }
    }
}

fn skip(subset: &FeatureSubset, k: usize, reason: impl Into<String>) -> Outcome {
    Outcome::Skip(Skipped {
        subset: subset.clone(),
        k,
        reason: reason.into(),
    })
}

fn evaluate_subset(ds: &Dataset, cfg: &SearchConfig, subset: &FeatureSubset) -> Vec<Outcome> {
    let points = match Points::standardized(ds, subset) {
        Ok(p) => p,
        Err(e) => {
            return cfg
                .k_range()
                .map(|k| skip(subset, k, e.to_string()))
                .collect()
        }
    };
    let mut fitted = Vec::new();
    let mut outcomes: Vec<Option<Outcome>> = Vec::new();
    for k in cfg.k_range() {
        let seed = cfg.task_seed(subset, k);
        match fit(&points, cfg, k, seed) {
            Ok((assignments, objective, flags)) => {
                fitted.push(Fitted {
                    k,
                    seed,
                    assignments,
                    objective,
                    flags,
                });
                outcomes.push(None);
            }
            Err(e) => outcomes.push(Some(skip(subset, k, e.to_string()))),
        }
    }

    let shapes: Vec<Option<ShapeScores>> = if cfg.shape.enabled && !fitted.is_empty() {
        let labelings: Vec<(&[usize], usize)> = fitted
            .iter()
            .map(|f| (f.assignments.as_slice(), f.k))
            .collect();
        let sil = silhouette_many(&points, &labelings, cfg.shape.silhouette_sample);
        fitted
            .iter()
            .zip(sil)
            .map(|(f, silhouette)| {
                Some(ShapeScores {
                    silhouette,
                    davies_bouldin: davies_bouldin_value(&points, &f.assignments, f.k)
                        .unwrap_or(f64::NAN),
                    calinski_harabasz: calinski_harabasz_value(&points, &f.assignments, f.k)
                        .unwrap_or(f64::NAN),
                })
            })
            .collect()
    } else {
        vec![None; fitted.len()]
    };

    let mut fitted_iter = fitted.into_iter().zip(shapes);
    outcomes
        .into_iter()
        .map(|slot| match slot {
            Some(outcome) => outcome,
            None => {
                let (f, shape) = fitted_iter.next().expect("one fit per empty slot");
                score_fit(ds, cfg, subset, f, shape)
            }
        })
        .collect()
}

fn score_fit(
    ds: &Dataset,
    cfg: &SearchConfig,
    subset: &FeatureSubset,
    f: Fitted,
    shape: Option<ShapeScores>,
) -> Outcome {
    let dist = match first_occurrences(&f.assignments, ds.axis(), f.k)
        .and_then(|o| OnsetDistribution::from_onsets(o, ds.axis_end()))
    {
        Ok(d) => d,
        Err(e) => return skip(subset, f.k, e.to_string()),
    };
    let prior = cfg.priors.as_ref().and_then(|p| p.get(&f.k));
    let (kind, value) = match score_onsets(&dist, prior) {
        Ok(s) => s,
        Err(e) => return skip(subset, f.k, e.to_string()),
    };
    if !value.is_finite() {
        return skip(subset, f.k, "prior-incompatible: infinite divergence");
    }
    Outcome::Record(SearchRecord {
        subset: subset.clone(),
        k: f.k,
        score: CviScore::new(kind, f.k, subset.clone(), value),
        onsets: dist.raw_onsets().collect(),
        objective: f.objective,
        seed: f.seed,
        flags: f.flags,
        shape,
    })
}

/// Runs the full sweep with default scheduling.
pub fn run_search(ds: &Dataset, cfg: &SearchConfig) -> Result<SearchResult> {
    run_search_with(ds, cfg, RunOptions::default())
}

/// Runs the sweep over every subset of `cfg.subset_size` features and every K.
///
/// The result does not depend on `opts`: tasks are seeded by `(subset, K)`
/// and merged in subset order. A cancelled sweep returns the tasks that
/// finished, with `complete = false`.
pub fn run_search_with(
    ds: &Dataset,
    cfg: &SearchConfig,
    opts: RunOptions<'_>,
) -> Result<SearchResult> {
    cfg.validate(ds.dim())?;
    if cfg.k_max > ds.len() {
        return Err(Error::Argument(format!(
            "k_max={} exceeds {} events",
            cfg.k_max,
            ds.len()
        )));
    }
    let subsets: Vec<FeatureSubset> = enumerate_subsets(ds.dim(), cfg.subset_size)?.collect();
    let planned = subsets.len() * cfg.k_count();
    log::info!(
        "sweeping {} subsets x {} cluster counts = {planned} combinations",
        subsets.len(),
        cfg.k_count()
    );

    let cancelled = |opts: &RunOptions<'_>| opts.cancel.is_some_and(|c| c.load(Ordering::Relaxed));
    let work = || -> Vec<Option<Vec<Outcome>>> {
        subsets
            .par_iter()
            .map(|s| (!cancelled(&opts)).then(|| evaluate_subset(ds, cfg, s)))
            .collect()
    };
    let per_subset = match opts.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Argument(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut result = SearchResult {
        records: Vec::new(),
        skipped: Vec::new(),
        attempted: 0,
        planned,
        complete: true,
    };
    for outcomes in per_subset {
        let Some(outcomes) = outcomes else {
            result.complete = false;
            continue;
        };
        for outcome in outcomes {
            result.attempted += 1;
            match outcome {
                Outcome::Record(r) => result.records.push(r),
                Outcome::Skip(s) => result.skipped.push(s),
            }
        }
    }
    if !result.complete {
        log::warn!(
            "sweep cancelled after {} of {planned} combinations",
            result.attempted
        );
    }
    if result.records.is_empty() && result.complete {
        return Err(Error::SearchFailed(format!(
            "all {} combinations were skipped",
            result.attempted
        )));
    }
    Ok(result)
}

/// Re-runs the clustering behind a record.
pub fn materialize(ds: &Dataset, cfg: &SearchConfig, record: &SearchRecord) -> Result<Partition> {
    let points = Points::standardized(ds, &record.subset)?;
    match cfg.engine {
        Engine::Kmeans => {
            let fit = kmeans_points(&points, record.k, &cfg.kmeans_options(), record.seed)?;
            Ok(crate::clustering::kmeans_partition(
                fit,
                record.k,
                record.subset.clone(),
                points.dim(),
                record.seed,
            ))
        }
        Engine::Gk => {
            let fit = gk_points(&points, record.k, &cfg.gk_options(), record.seed)?;
            Ok(crate::clustering::gk_partition(
                fit,
                record.k,
                record.subset.clone(),
                record.seed,
            ))
        }
    }
}
