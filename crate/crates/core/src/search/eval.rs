use std::collections::BTreeMap;

use serde::Serialize;

use super::select::quantile;
use crate::error::{Error, Result};
use crate::validity::rand_index;

/// Box-plot summary of Rand indices for one K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandSummary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values beyond 1.5 interquartile ranges from the quartiles.
    pub outliers: usize,
    pub values: Vec<f64>,
}

impl RandSummary {
    fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let q1 = quantile(&values, 0.25);
        let q3 = quantile(&values, 0.75);
        let fence = 1.5 * (q3 - q1);
        let outliers = values
            .iter()
            .filter(|&&v| v < q1 - fence || v > q3 + fence)
            .count();
        Self {
            count: values.len(),
            min: values[0],
            q1,
            median: quantile(&values, 0.5),
            q3,
            max: values[values.len() - 1],
            outliers,
            values,
        }
    }
}

/// Rand index of every `(K, assignments)` pair against `truth`, summarized per K.
pub fn evaluate_against_truth<'a, I>(
    partitions: I,
    truth: Option<&[i64]>,
) -> Result<BTreeMap<usize, RandSummary>>
where
    I: IntoIterator<Item = (usize, &'a [usize])>,
{
    let truth =
        truth.ok_or_else(|| Error::State("dataset carries no ground-truth labels".into()))?;
    let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (k, assignments) in partitions {
        by_k.entry(k)
            .or_default()
            .push(rand_index(assignments, truth)?);
    }
    Ok(by_k
        .into_iter()
        .map(|(k, v)| (k, RandSummary::from_values(v)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_partitions() {
        let truth = [1i64, 1, 2, 2, 3, 3];
        let a = [1usize, 1, 2, 2, 3, 3];
        let b = [3usize, 3, 1, 1, 2, 2];
        let out = evaluate_against_truth([(3, &a[..]), (3, &b[..])], Some(&truth)).unwrap();
        let s = &out[&3];
        assert_eq!((s.min, s.max, s.median, s.outliers), (1.0, 1.0, 1.0, 0));
    }

    #[test]
    fn median_of_two_is_their_mean() {
        let truth = [1i64, 1, 1, 2, 2, 2];
        let good = [1usize, 1, 1, 2, 2, 2];
        let mixed = [1usize, 2, 1, 2, 1, 2];
        let ri_mixed = rand_index(&mixed, &truth).unwrap();
        let out = evaluate_against_truth([(2, &good[..]), (2, &mixed[..])], Some(&truth)).unwrap();
        assert!((out[&2].median - 0.5 * (1.0 + ri_mixed)).abs() < 1e-12);
    }

    #[test]
    fn outliers_by_fences() {
        let s = RandSummary::from_values(vec![0.9, 0.91, 0.92, 0.93, 0.94, 0.2]);
        assert_eq!(s.outliers, 1);
        assert_eq!(s.min, 0.2);
    }

    #[test]
    fn missing_truth() {
        let a = [1usize, 2];
        assert!(matches!(
            evaluate_against_truth([(2, &a[..])], None),
            Err(Error::State(_))
        ));
    }
}
