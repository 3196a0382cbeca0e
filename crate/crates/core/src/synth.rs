//! Synthetic staged event streams with known change points.
//!
//! Events arrive at a constant rate over consecutive stages. Informative
//! features shift their mean at every stage change. Nuisance features come in
//! two kinds: pure Gaussian noise, and "source" features that follow a latent
//! source type drawn independently per event. Source types form compact,
//! well-separated groups present from the first event on, so they carry
//! strong geometric structure but no temporal one.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Duration of every stage, in axis units.
    pub durations: Vec<f64>,
    pub n_events: usize,
    pub informative: usize,
    pub nuisance: usize,
    /// How many nuisance features follow the latent source type.
    pub source_features: usize,
    pub source_types: usize,
    /// Mean shift between stage levels of an informative feature.
    pub stage_step: f64,
    pub informative_noise: f64,
    /// Spread of source-type centers along each source feature.
    pub source_spread: f64,
    pub source_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            durations: vec![10.0; 7],
            n_events: 4000,
            informative: 4,
            nuisance: 15,
            source_features: 8,
            source_types: 7,
            stage_step: 1.0,
            informative_noise: 0.3,
            source_spread: 10.0,
            source_noise: 0.1,
            seed: 0,
        }
    }
}

/// Ground truth of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Start time of every stage; the first is 0.
    pub change_points: Vec<f64>,
    pub axis_end: f64,
    /// Columns holding informative features.
    pub informative: Vec<usize>,
    /// Columns following the latent source type.
    pub source: Vec<usize>,
    pub events_per_stage: Vec<usize>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.durations.is_empty() {
            return Err(Error::Argument("at least one stage is required".into()));
        }
        if let Some(d) = self
            .durations
            .iter()
            .find(|d| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::Argument(format!(
                "stage duration {d} must be positive"
            )));
        }
        if self.n_events < self.durations.len() {
            return Err(Error::Argument(format!(
                "{} events cannot cover {} stages",
                self.n_events,
                self.durations.len()
            )));
        }
        if self.informative + self.nuisance == 0 {
            return Err(Error::Argument("no features requested".into()));
        }
        if self.source_features > self.nuisance {
            return Err(Error::Argument(format!(
                "{} source features exceed {} nuisance features",
                self.source_features, self.nuisance
            )));
        }
        if self.source_features > 0 && self.source_types == 0 {
            return Err(Error::Argument(
                "source features need at least one source type".into(),
            ));
        }
        for (name, v) in [
            ("stage_step", self.stage_step),
            ("informative_noise", self.informative_noise),
            ("source_spread", self.source_spread),
            ("source_noise", self.source_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.informative + self.nuisance
    }

    pub fn change_points(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.durations
            .iter()
            .map(|d| {
                let start = t;
                t += d;
                start
            })
            .collect()
    }

    /// Events per stage, proportional to duration (largest remainder, at least one each).
    fn stage_counts(&self) -> Vec<usize> {
        let total: f64 = self.durations.iter().sum();
        let spare = self.n_events - self.durations.len();
        let exact: Vec<f64> = self
            .durations
            .iter()
            .map(|d| d / total * spare as f64)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let missing = spare - counts.iter().sum::<usize>();
        for &i in order.iter().take(missing) {
            counts[i] += 1;
        }
        counts.iter().map(|c| c + 1).collect()
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated standard deviation")
}

/// Generates the dataset (labels are stage numbers from 1) and its truth.
pub fn generate(cfg: &SynthConfig) -> Result<(Dataset, SynthTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stages = cfg.durations.len();
    let change_points = cfg.change_points();
    let axis_end: f64 = cfg.durations.iter().sum();
    let counts = cfg.stage_counts();

    let mut axis = Vec::with_capacity(cfg.n_events);
    let mut labels = Vec::with_capacity(cfg.n_events);
    for (s, (&start, &count)) in change_points.iter().zip(&counts).enumerate() {
        let mut times: Vec<f64> = (0..count)
            .map(|_| start + rng.random::<f64>() * cfg.durations[s])
            .collect();
        times.sort_by(f64::total_cmp);
        axis.extend(times);
        labels.extend(std::iter::repeat_n(s as i64 + 1, count));
    }

    // Stage level of each informative feature: a random ordering of the stages.
    let levels: Vec<Vec<f64>> = (0..cfg.informative)
        .map(|_| {
            let mut perm: Vec<usize> = (0..stages).collect();
            perm.shuffle(&mut rng);
            perm.into_iter()
                .map(|r| r as f64 * cfg.stage_step)
                .collect()
        })
        .collect();
    let centers: Vec<Vec<f64>> = (0..cfg.source_types)
        .map(|_| {
            (0..cfg.source_features)
                .map(|_| rng.random::<f64>() * cfg.source_spread)
                .collect()
        })
        .collect();
    let mut columns: Vec<usize> = (0..cfg.d()).collect();
    columns.shuffle(&mut rng);

    let d = cfg.d();
    let info_noise = normal(cfg.informative_noise);
    let source_noise = normal(cfg.source_noise);
    let unit = normal(1.0);
    let mut data = vec![0.0; cfg.n_events * d];
    for (i, row) in data.chunks_exact_mut(d).enumerate() {
        let stage = (labels[i] - 1) as usize;
        let source = if cfg.source_types > 0 {
            rng.random_range(0..cfg.source_types)
        } else {
            0
        };
        for (j, level) in levels.iter().enumerate() {
            row[columns[j]] = level[stage] + info_noise.sample(&mut rng);
        }
        for j in 0..cfg.source_features {
            row[columns[cfg.informative + j]] = centers[source][j] + source_noise.sample(&mut rng);
        }
        for j in cfg.source_features..cfg.nuisance {
            row[columns[cfg.informative + j]] = unit.sample(&mut rng);
        }
    }

    let features = ndarray::Array2::from_shape_vec((cfg.n_events, d), data)
        .map_err(|e| Error::Validation(e.to_string()))?;
    let names = (0..d).map(|j| format!("f{j:02}")).collect();
    let ds = Dataset::new(axis, features, names, Some(labels), Some(axis_end))?;
    let mut informative: Vec<usize> = columns[..cfg.informative].to_vec();
    informative.sort_unstable();
    let mut source: Vec<usize> =
        columns[cfg.informative..cfg.informative + cfg.source_features].to_vec();
    source.sort_unstable();
    Ok((
        ds,
        SynthTruth {
            change_points,
            axis_end,
            informative,
            source,
            events_per_stage: counts,
            seed: cfg.seed,
        },
    ))
}

/// Two long, thin, parallel bands on a diagonal, labelled 1 and 2.
///
/// Bands run along `(1, 1)` over `[-4, 4]` and sit `±1` apart along `(1, -1)`
/// with cross-band spread 0.1, so a round-cluster model cuts them crosswise.
/// The axis is the row index; rows alternate between the bands.
pub fn anisotropic_fixture(per_band: usize, seed: u64) -> Result<Dataset> {
    if per_band < 2 {
        return Err(Error::Argument(
            "each band needs at least two points".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let across = normal(0.1);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let n = 2 * per_band;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let band = i % 2;
        let along = rng.random_range(-4.0..4.0);
        let off = if band == 0 { -1.0 } else { 1.0 } + across.sample(&mut rng);
        data.push(r * (along + off));
        data.push(r * (along - off));
        labels.push(band as i64 + 1);
    }
    let features = ndarray::Array2::from_shape_vec((n, 2), data)
        .map_err(|e| Error::Validation(e.to_string()))?;
    let axis = (0..n).map(|i| i as f64).collect();
    Dataset::new(
        axis,
        features,
        vec!["u".into(), "v".into()],
        Some(labels),
        Some(n as f64),
    )
}
