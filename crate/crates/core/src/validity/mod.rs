//! Validity indices: onset-based (entropy / KL), shape-based baselines and
//! the Rand index against ground truth.

pub mod info;
pub mod onset;
mod rand_index;
pub mod shape;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSubset;

pub use info::{cross_entropy, entropy, kl_divergence, normalized_entropy};
pub use onset::{extract_onsets, onset_cvi, OnsetDistribution, PriorOnsets};
pub use rand_index::rand_index;
pub use shape::{calinski_harabasz, davies_bouldin, silhouette};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CviKind {
    OnsetEntropy,
    OnsetKl,
    Silhouette,
    DaviesBouldin,
    CalinskiHarabasz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl CviKind {
    pub const SHAPE: [CviKind; 3] = [
        CviKind::Silhouette,
        CviKind::DaviesBouldin,
        CviKind::CalinskiHarabasz,
    ];

    pub fn direction(self) -> Direction {
        match self {
            CviKind::OnsetEntropy | CviKind::Silhouette | CviKind::CalinskiHarabasz => {
                Direction::Maximize
            }
            CviKind::OnsetKl | CviKind::DaviesBouldin => Direction::Minimize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CviKind::OnsetEntropy => "onset_entropy",
            CviKind::OnsetKl => "onset_kl",
            CviKind::Silhouette => "silhouette",
            CviKind::DaviesBouldin => "davies_bouldin",
            CviKind::CalinskiHarabasz => "calinski_harabasz",
        }
    }
}

impl Direction {
    /// Orders values so that the better one compares as `Less`.
    pub fn compare(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Direction::Maximize => b.total_cmp(&a),
            Direction::Minimize => a.total_cmp(&b),
        }
    }

    pub fn is_better(self, a: f64, b: f64) -> bool {
        self.compare(a, b) == std::cmp::Ordering::Less
    }
}

/// A validity value tagged with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CviScore {
    pub kind: CviKind,
    pub k: usize,
    pub subset: FeatureSubset,
    pub value: f64,
    pub direction: Direction,
}

impl CviScore {
    pub fn new(kind: CviKind, k: usize, subset: FeatureSubset, value: f64) -> Self {
        Self {
            kind,
            k,
            subset,
            value,
            direction: kind.direction(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions() {
        assert!(Direction::Maximize.is_better(2.0, 1.0));
        assert!(Direction::Minimize.is_better(1.0, 2.0));
        assert_eq!(CviKind::DaviesBouldin.direction(), Direction::Minimize);
        let s = CviScore::new(CviKind::OnsetKl, 3, FeatureSubset::all(2), 0.1);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"onset_kl","k":3,"subset":[0,1],"value":0.1,"direction":"minimize"}"#
        );
    }
}
