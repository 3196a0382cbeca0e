//! Shape-based voting baseline.
//!
//! Stage one: for every subset each enabled index votes for the K it rates
//! best, and the subset keeps the K with the largest weighted tally
//! (plurality). Stage two: each index ranks the `(subset, chosen K)`
//! candidates and the subset with the largest weighted Borda count wins.
//! Exact ties go to the smaller K and then to the lexicographically first
//! subset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SearchRecord, SearchResult};
use crate::dataset::FeatureSubset;
use crate::error::{Error, Result};
use crate::validity::CviKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteWeights {
    /// Weights of the per-subset K vote.
    pub w1: BTreeMap<CviKind, f64>,
    /// Weights of the cross-subset vote.
    pub w2: BTreeMap<CviKind, f64>,
}

impl Default for VoteWeights {
    /// Silhouette, Davies–Bouldin and Calinski–Harabasz with unit weights.
    fn default() -> Self {
        let unit: BTreeMap<CviKind, f64> = CviKind::SHAPE.iter().map(|&k| (k, 1.0)).collect();
        Self {
            w1: unit.clone(),
            w2: unit,
        }
    }
}

impl VoteWeights {
    pub fn single(kind: CviKind) -> Self {
        let one: BTreeMap<CviKind, f64> = [(kind, 1.0)].into_iter().collect();
        Self {
            w1: one.clone(),
            w2: one,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w1", &self.w1), ("w2", &self.w2)] {
            if let Some((kind, v)) = w.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
                return Err(Error::Argument(format!(
                    "{name} weight {v} for {} is invalid",
                    kind.name()
                )));
            }
            if let Some(kind) = w.keys().find(|k| !CviKind::SHAPE.contains(k)) {
                return Err(Error::Argument(format!(
                    "{} is not a shape index",
                    kind.name()
                )));
            }
            if !w.values().any(|&v| v > 0.0) {
                return Err(Error::Argument(format!("{name} enables no shape index")));
            }
        }
        Ok(())
    }

    fn active(w: &BTreeMap<CviKind, f64>) -> impl Iterator<Item = (CviKind, f64)> + '_ {
        w.iter().filter(|(_, &v)| v > 0.0).map(|(&k, &v)| (k, v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteOutcome {
    pub best_subset: FeatureSubset,
    pub best_k: usize,
    /// Winning record (re-materialize it for the partition).
    pub record: SearchRecord,
    /// Stage-one choice for every candidate subset.
    pub nb_clusters: BTreeMap<FeatureSubset, usize>,
    /// Stage-two weighted Borda score of every candidate subset.
    pub borda: BTreeMap<FeatureSubset, f64>,
    /// Candidate subsets from best to worst Borda score (ties lexicographic).
    pub ranking: Vec<FeatureSubset>,
}

fn shape_value(r: &SearchRecord, kind: CviKind) -> Result<f64> {
    r.shape.and_then(|s| s.get(kind)).ok_or_else(|| {
        Error::State("records carry no shape scores; enable shape in the sweep".into())
    })
}

/// Runs both voting stages over every record of `res`.
pub fn voting_scheme(res: &SearchResult, weights: &VoteWeights) -> Result<VoteOutcome> {
    vote_records(res.records.iter(), weights)
}

/// The voting scheme applied separately to each K (stage one is then trivial).
pub fn vote_per_k(
    res: &SearchResult,
    weights: &VoteWeights,
) -> Result<BTreeMap<usize, VoteOutcome>> {
    res.ks()
        .into_iter()
        .map(|k| Ok((k, vote_records(res.records_for(k), weights)?)))
        .collect()
}

fn vote_records<'a, I>(records: I, weights: &VoteWeights) -> Result<VoteOutcome>
where
    I: IntoIterator<Item = &'a SearchRecord>,
{
    weights.validate()?;
    let mut by_subset: BTreeMap<&FeatureSubset, Vec<&SearchRecord>> = BTreeMap::new();
    for r in records {
        by_subset.entry(&r.subset).or_default().push(r);
    }
    if by_subset.is_empty() {
        return Err(Error::SearchFailed("no records to vote on".into()));
    }

    // Stage one: plurality over K inside each subset.
    let mut candidates: Vec<&SearchRecord> = Vec::with_capacity(by_subset.len());
    let mut nb_clusters = BTreeMap::new();
    for (subset, mut recs) in by_subset {
        recs.sort_by_key(|r| r.k);
        let mut tally: BTreeMap<usize, f64> = BTreeMap::new();
        for (kind, w) in VoteWeights::active(&weights.w1) {
            let mut best = recs[0];
            for &r in &recs[1..] {
                if kind
                    .direction()
                    .is_better(shape_value(r, kind)?, shape_value(best, kind)?)
                {
                    best = r;
                }
            }
            *tally.entry(best.k).or_default() += w;
        }
        let mut chosen = recs[0];
        let mut chosen_votes = f64::NEG_INFINITY;
        for &r in &recs {
            let votes = tally.get(&r.k).copied().unwrap_or(0.0);
            if votes > chosen_votes {
                chosen = r;
                chosen_votes = votes;
            }
        }
        nb_clusters.insert(subset.clone(), chosen.k);
        candidates.push(chosen);
    }

    // Stage two: weighted Borda count, one point per candidate ranked strictly worse.
    let mut borda: BTreeMap<FeatureSubset, f64> =
        candidates.iter().map(|r| (r.subset.clone(), 0.0)).collect();
    for (kind, w) in VoteWeights::active(&weights.w2) {
        let values: Vec<f64> = candidates
            .iter()
            .map(|r| shape_value(r, kind))
            .collect::<Result<_>>()?;
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| kind.direction().compare(*a, *b));
        for (r, &v) in candidates.iter().zip(&values) {
            // Candidates strictly worse than v sit after the last position equal to or better than v.
            let not_worse = sorted.partition_point(|&x| kind.direction().compare(x, v).is_le());
            let worse = sorted.len() - not_worse;
            *borda.get_mut(&r.subset).expect("candidate present") += w * worse as f64;
        }
    }
    let mut ranked = candidates.clone();
    ranked.sort_by(|a, b| {
        borda[&b.subset]
            .total_cmp(&borda[&a.subset])
            .then_with(|| a.subset.cmp(&b.subset))
    });
    let winner = ranked[0];

    Ok(VoteOutcome {
        best_subset: winner.subset.clone(),
        best_k: winner.k,
        record: winner.clone(),
        nb_clusters,
        borda,
        ranking: ranked.iter().map(|r| r.subset.clone()).collect(),
    })
}

/// Per K, the `top_n` records ranked best by the voting scheme run on that K alone.
pub fn select_voted<'a>(
    res: &'a SearchResult,
    weights: &VoteWeights,
    top_n: usize,
) -> Result<BTreeMap<usize, Vec<&'a SearchRecord>>> {
    let mut out = BTreeMap::new();
    for k in res.ks() {
        let outcome = vote_records(res.records_for(k), weights)?;
        let by_subset: BTreeMap<&FeatureSubset, &SearchRecord> =
            res.records_for(k).map(|r| (&r.subset, r)).collect();
        let picked = outcome
            .ranking
            .iter()
            .take(top_n)
            .map(|s| by_subset[s])
            .collect();
        out.insert(k, picked);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::FitFlags;
    use crate::search::ShapeScores;
    use crate::validity::CviScore;

    fn rec(subset: usize, k: usize, sil: f64, db: f64, ch: f64) -> SearchRecord {
        let subset = FeatureSubset::new(vec![subset]).unwrap();
        SearchRecord {
            subset: subset.clone(),
            k,
            score: CviScore::new(CviKind::OnsetEntropy, k, subset, 0.5),
            onsets: vec![],
            objective: 0.0,
            seed: 0,
            flags: FitFlags::default(),
            shape: Some(ShapeScores {
                silhouette: sil,
                davies_bouldin: db,
                calinski_harabasz: ch,
            }),
        }
    }

    fn result(records: Vec<SearchRecord>) -> SearchResult {
        let n = records.len();
        SearchResult {
            records,
            skipped: vec![],
            attempted: n,
            planned: n,
            complete: true,
        }
    }

    #[test]
    fn plurality_picks_majority_k() {
        // Silhouette and CH prefer K=3, DB prefers K=2.
        let res = result(vec![
            rec(0, 2, 0.5, 0.3, 100.0),
            rec(0, 3, 0.7, 0.5, 200.0),
            rec(0, 4, 0.4, 0.9, 150.0),
        ]);
        let out = voting_scheme(&res, &VoteWeights::default()).unwrap();
        assert_eq!(out.best_k, 3);
    }

    #[test]
    fn unanimous_choice_wins_for_any_weights() {
        let res = result(vec![
            rec(0, 2, 0.2, 1.0, 10.0),
            rec(0, 3, 0.3, 0.9, 20.0),
            rec(1, 2, 0.4, 0.8, 30.0),
            rec(1, 3, 0.9, 0.1, 90.0),
        ]);
        for w in [0.1, 1.0, 7.0] {
            let weights = VoteWeights {
                w1: CviKind::SHAPE.iter().map(|&k| (k, w)).collect(),
                w2: CviKind::SHAPE.iter().map(|&k| (k, 1.0 / w)).collect(),
            };
            let out = voting_scheme(&res, &weights).unwrap();
            assert_eq!((out.best_subset.indices()[0], out.best_k), (1, 3));
        }
    }

    #[test]
    fn borda_ties_go_to_first_subset() {
        let res = result(vec![rec(3, 2, 0.5, 0.5, 5.0), rec(1, 2, 0.5, 0.5, 5.0)]);
        let out = voting_scheme(&res, &VoteWeights::default()).unwrap();
        assert_eq!(out.best_subset.indices(), &[1]);
        assert_eq!(
            out.borda.values().copied().collect::<Vec<_>>(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn weight_and_state_errors() {
        let res = result(vec![rec(0, 2, 0.5, 0.5, 5.0)]);
        let mut bad = VoteWeights::default();
        bad.w1.values_mut().for_each(|v| *v = 0.0);
        assert!(voting_scheme(&res, &bad).is_err());
        let mut onset = VoteWeights::default();
        onset.w2.insert(CviKind::OnsetEntropy, 1.0);
        assert!(voting_scheme(&res, &onset).is_err());
        let mut plain = rec(0, 2, 0.0, 0.0, 0.0);
        plain.shape = None;
        assert!(matches!(
            voting_scheme(&result(vec![plain]), &VoteWeights::default()),
            Err(Error::State(_))
        ));
        assert!(matches!(
            voting_scheme(&result(vec![]), &VoteWeights::default()),
            Err(Error::SearchFailed(_))
        ));
    }

    #[test]
    fn per_k_votes() {
        let res = result(vec![
            rec(0, 2, 0.9, 0.2, 50.0),
            rec(1, 2, 0.1, 0.9, 5.0),
            rec(0, 3, 0.1, 0.9, 5.0),
            rec(1, 3, 0.9, 0.2, 50.0),
        ]);
        let out = vote_per_k(&res, &VoteWeights::default()).unwrap();
        assert_eq!(out[&2].best_subset.indices(), &[0]);
        assert_eq!(out[&3].best_subset.indices(), &[1]);
        let top = select_voted(&res, &VoteWeights::default(), 1).unwrap();
        assert_eq!(top[&2][0].subset.indices(), &[0]);
        assert_eq!(top[&3][0].subset.indices(), &[1]);
        assert_eq!(
            select_voted(&res, &VoteWeights::default(), 5).unwrap()[&2].len(),
            2
        );
    }
}
