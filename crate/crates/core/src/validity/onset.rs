//! Cluster onsets and the onset-based validity index.
//!
//! The onset of a cluster is the axis value of its first event. Sorted in
//! time and shifted so the earliest sits at zero, consecutive onsets split
//! the shifted horizon into K gaps; the gaps divided by the horizon form a
//! probability vector. Without a prior the index is its normalized entropy
//! (higher is better); with a prior it is the KL divergence to the prior
//! (lower is better).

use serde::{Deserialize, Serialize};

use super::info::{check_distribution, kl_divergence, normalized_entropy};
use super::{CviKind, CviScore};
use crate::clustering::Partition;
use crate::error::{Error, Result};

/// Time-ordered onsets and the gap distribution they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetDistribution {
    /// Cluster ids in onset order.
    pub clusters: Vec<usize>,
    /// Onsets relative to the first one (first is 0), ascending.
    pub onsets: Vec<f64>,
    /// Axis value of the first onset on the original axis.
    pub origin: f64,
    /// Horizon on the shifted axis: `axis_end - origin`.
    pub t_end: f64,
    /// Gap of each onset to the next one (the last to `t_end`) over `t_end`.
    pub deltas: Vec<f64>,
}

impl OnsetDistribution {
    /// Builds the distribution from `(cluster id, raw onset)` pairs.
    pub fn from_onsets(mut onsets: Vec<(usize, f64)>, axis_end: f64) -> Result<Self> {
        if onsets.is_empty() {
            return Err(Error::Degenerate("no onsets".into()));
        }
        if onsets.iter().any(|(_, t)| !t.is_finite()) || !axis_end.is_finite() {
            return Err(Error::Argument("non-finite onset or horizon".into()));
        }
        onsets.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let origin = onsets[0].1;
        let t_end = axis_end - origin;
        if !(t_end > 0.0) {
            return Err(Error::Degenerate(format!(
                "horizon {axis_end} does not extend past the first onset {origin}"
            )));
        }
        if let Some((c, t)) = onsets.iter().find(|(_, t)| *t > axis_end) {
            return Err(Error::Argument(format!(
                "onset {t} of cluster {c} lies beyond the horizon {axis_end}"
            )));
        }
        let shifted: Vec<f64> = onsets.iter().map(|(_, t)| t - origin).collect();
        let deltas = shifted
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let next = shifted.get(i + 1).copied().unwrap_or(t_end);
                (next - t) / t_end
            })
            .collect();
        Ok(Self {
            clusters: onsets.into_iter().map(|(c, _)| c).collect(),
            onsets: shifted,
            origin,
            t_end,
            deltas,
        })
    }

    pub fn k(&self) -> usize {
        self.deltas.len()
    }

    /// Onsets on the original axis.
    pub fn raw_onsets(&self) -> impl Iterator<Item = f64> + '_ {
        self.onsets.iter().map(move |t| t + self.origin)
    }
}

/// First axis value of every cluster `1..=k`.
pub fn first_occurrences(
    assignments: &[usize],
    axis: &[f64],
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    if assignments.len() != axis.len() {
        return Err(Error::Argument(format!(
            "partition has {} events but the axis has {}",
            assignments.len(),
            axis.len()
        )));
    }
    let mut first = vec![None; k];
    let mut found = 0;
    for (&c, &t) in assignments.iter().zip(axis) {
        if c == 0 || c > k {
            return Err(Error::Argument(format!("cluster id {c} outside 1..={k}")));
        }
        if first[c - 1].is_none() {
            first[c - 1] = Some(t);
            found += 1;
            if found == k {
                break;
            }
        }
    }
    first
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            t.map(|t| (i + 1, t))
                .ok_or(Error::EmptyCluster { k, cluster: i + 1 })
        })
        .collect()
}

/// Onsets of a partition along `axis`, with `axis_end` as the test end.
pub fn extract_onsets(p: &Partition, axis: &[f64], axis_end: f64) -> Result<OnsetDistribution> {
    let onsets = first_occurrences(p.assignments(), axis, p.k())?;
    OnsetDistribution::from_onsets(onsets, axis_end)
}

/// Expected gap distribution supplied by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriorOnsets(Vec<f64>);

impl PriorOnsets {
    pub fn new(distribution: Vec<f64>) -> Result<Self> {
        check_distribution(&distribution)?;
        Ok(Self(distribution))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("uniform prior needs k >= 1".into()));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub fn distribution(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for PriorOnsets {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PriorOnsets> for Vec<f64> {
    fn from(value: PriorOnsets) -> Self {
        value.0
    }
}

/// Scores an onset distribution: normalized entropy without a prior, KL with one.
pub fn score_onsets(
    dist: &OnsetDistribution,
    prior: Option<&PriorOnsets>,
) -> Result<(CviKind, f64)> {
    match prior {
        None => {
            if dist.k() < 2 {
                return Err(Error::Unsupported(
                    "onset entropy needs at least two clusters".into(),
                ));
            }
            Ok((CviKind::OnsetEntropy, normalized_entropy(&dist.deltas)?))
        }
        Some(prior) => {
            if prior.len() != dist.k() {
                return Err(Error::Argument(format!(
                    "prior has {} entries for {} clusters",
                    prior.len(),
                    dist.k()
                )));
            }
            Ok((
                CviKind::OnsetKl,
                kl_divergence(&dist.deltas, prior.distribution())?,
            ))
        }
    }
}

/// Onset-based validity of a partition.
pub fn onset_cvi(
    p: &Partition,
    axis: &[f64],
    axis_end: f64,
    prior: Option<&PriorOnsets>,
) -> Result<CviScore> {
    let dist = extract_onsets(p, axis, axis_end)?;
    let (kind, value) = score_onsets(&dist, prior)?;
    Ok(CviScore::new(kind, p.k(), p.subset().clone(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example_partition() -> (Partition, Vec<f64>) {
        // Clusters first appear at 27, 57 and 82 on a test ending at 127.
        let axis = vec![27.0, 40.0, 57.0, 60.0, 82.0, 100.0];
        let p = Partition::from_labels(vec![2, 2, 3, 2, 1, 3], 3).unwrap();
        (p, axis)
    }

    #[test]
    fn worked_example_deltas() {
        let (p, axis) = example_partition();
        let d = extract_onsets(&p, &axis, 127.0).unwrap();
        assert_eq!(d.onsets, vec![0.0, 30.0, 55.0]);
        assert_eq!(d.t_end, 100.0);
        assert_eq!(d.clusters, vec![2, 3, 1]);
        assert_abs_diff_eq!(d.deltas[0], 0.30, epsilon = 1e-12);
        assert_abs_diff_eq!(d.deltas[1], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(d.deltas[2], 0.45, epsilon = 1e-12);
        assert_eq!(d.raw_onsets().collect::<Vec<_>>(), vec![27.0, 57.0, 82.0]);
    }

    #[test]
    fn worked_example_scores() {
        let (p, axis) = example_partition();
        let e = onset_cvi(&p, &axis, 127.0, None).unwrap();
        assert_eq!(e.kind, CviKind::OnsetEntropy);
        assert_abs_diff_eq!(e.value, 0.971, epsilon = 1e-3);
        let prior = PriorOnsets::uniform(3).unwrap();
        let kl = onset_cvi(&p, &axis, 127.0, Some(&prior)).unwrap();
        assert_eq!(kl.kind, CviKind::OnsetKl);
        assert_abs_diff_eq!(kl.value, 0.0454714, epsilon = 1e-6);
    }

    #[test]
    fn first_occurrence_scan() {
        let p = Partition::from_labels(vec![2, 2, 1, 1, 3], 3).unwrap();
        let axis = [0.0, 1.0, 2.0, 3.0, 4.0];
        let firsts = first_occurrences(p.assignments(), &axis, 3).unwrap();
        assert_eq!(firsts, vec![(1, 2.0), (2, 0.0), (3, 4.0)]);
        let d = extract_onsets(&p, &axis, 4.0).unwrap();
        assert_eq!(d.deltas, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn single_cluster_has_unit_delta() {
        let p = Partition::from_labels(vec![1, 1, 1], 1).unwrap();
        let d = extract_onsets(&p, &[0.0, 1.0, 2.0], 2.0).unwrap();
        assert_eq!(d.deltas, vec![1.0]);
        assert!(matches!(
            onset_cvi(&p, &[0.0, 1.0, 2.0], 2.0, None),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn uniform_onsets_score_one() {
        let axis: Vec<f64> = (0..8).map(f64::from).collect();
        let p = Partition::from_labels(vec![1, 1, 2, 2, 3, 3, 4, 4], 4).unwrap();
        let s = onset_cvi(&p, &axis, 8.0, None).unwrap();
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_horizon() {
        let p = Partition::from_labels(vec![1, 2], 2).unwrap();
        assert!(matches!(
            extract_onsets(&p, &[5.0, 5.0], 5.0),
            Err(Error::Degenerate(_))
        ));
        assert!(extract_onsets(&p, &[1.0], 5.0).is_err());
    }

    #[test]
    fn prior_validation() {
        assert!(PriorOnsets::new(vec![0.2, 0.8]).is_ok());
        assert!(PriorOnsets::new(vec![0.2, 0.7]).is_err());
        let (p, axis) = example_partition();
        let wrong_len = PriorOnsets::uniform(2).unwrap();
        assert!(onset_cvi(&p, &axis, 127.0, Some(&wrong_len)).is_err());
        let incompatible = PriorOnsets::new(vec![0.5, 0.5, 0.0]).unwrap();
        let s = onset_cvi(&p, &axis, 127.0, Some(&incompatible)).unwrap();
        assert_eq!(s.value, f64::INFINITY);
    }
}
