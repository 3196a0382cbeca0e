use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SearchRecord, SearchResult};
use crate::error::{Error, Result};
use crate::validity::Direction;

/// How many partitions to keep per K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The `n` best records.
    TopN(usize),
    /// Records at or beyond the given quantile of the per-K scores
    /// (the upper quantile for maximized scores, the mirrored lower one otherwise).
    Quantile(f64),
}

impl Selection {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Selection::TopN(0) => Err(Error::Argument("top_n must be at least 1".into())),
            Selection::Quantile(q) if !(q > 0.0 && q < 1.0) => Err(Error::Argument(format!(
                "quantile must lie in (0, 1), got {q}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Sample quantile with midpoint plotting positions `(i - 0.5) / n` and
/// linear interpolation, clamped to the extremes.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let pos = prob * n as f64 - 0.5;
    if pos <= 0.0 {
        return sorted[0];
    }
    if pos >= (n - 1) as f64 {
        return sorted[n - 1];
    }
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Best records per K, in rank order (score, then subset).
pub fn select_best<'a>(
    res: &'a SearchResult,
    selection: &Selection,
) -> BTreeMap<usize, Vec<&'a SearchRecord>> {
    let mut by_k: BTreeMap<usize, Vec<&SearchRecord>> = BTreeMap::new();
    for r in &res.records {
        by_k.entry(r.k).or_default().push(r);
    }
    for records in by_k.values_mut() {
        records.sort_by(|a, b| {
            a.score
                .direction
                .compare(a.score.value, b.score.value)
                .then_with(|| a.subset.cmp(&b.subset))
        });
        match *selection {
            Selection::TopN(n) => records.truncate(n),
            Selection::Quantile(q) => {
                let direction = records[0].score.direction;
                let mut values: Vec<f64> = records.iter().map(|r| r.score.value).collect();
                values.sort_by(f64::total_cmp);
                match direction {
                    Direction::Maximize => {
                        let threshold = quantile(&values, q);
                        records.retain(|r| r.score.value >= threshold);
                    }
                    Direction::Minimize => {
                        let threshold = quantile(&values, 1.0 - q);
                        records.retain(|r| r.score.value <= threshold);
                    }
                }
            }
        }
    }
    by_k
}
