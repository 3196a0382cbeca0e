use proptest::prelude::*;

use onset_cvi::clustering::Partition;
use onset_cvi::validity::info::{cross_entropy, entropy, kl_divergence, normalized_entropy};
use onset_cvi::validity::onset::{extract_onsets, OnsetDistribution};
use onset_cvi::{onset_cvi, PriorOnsets};

/// Random distribution of length 2..=12 built from positive weights.
fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, 2..=12).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    })
}

fn distribution_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=12).prop_flat_map(|k| {
        let one = prop::collection::vec(1e-6f64..1.0, k).prop_map(|w| {
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect::<Vec<f64>>()
        });
        (one.clone(), one)
    })
}

/// Labels in 1..=k over a sorted axis that ends at `axis_end`.
fn labelled_axis() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, f64, usize)> {
    (2usize..=8, 10usize..60).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(1..=k, n),
            prop::collection::vec(0.0f64..100.0, n),
            1.0f64..50.0,
            Just(k),
        )
            .prop_map(|(labels, mut axis, tail, k)| {
                axis.sort_by(f64::total_cmp);
                let end = axis[axis.len() - 1] + tail;
                (labels, axis, end, k)
            })
    })
}

fn used_k(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Relabels to consecutive ids so every cluster is non-empty.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mapped = labels
        .iter()
        .map(|l| ids.binary_search(l).unwrap() + 1)
        .collect();
    (mapped, ids.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn deltas_sum_to_one((labels, axis, end, _k) in labelled_axis()) {
        let (labels, k) = compact(&labels);
        let p = Partition::from_labels(labels, k).unwrap();
        let dist = extract_onsets(&p, &axis, end).unwrap();
        let total: f64 = dist.deltas.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12, "sum {total}");
        prop_assert!(dist.deltas.iter().all(|&d| d >= 0.0));
        prop_assert_eq!(dist.k(), used_k(p.assignments()));
    }

    #[test]
    fn kl_is_non_negative((p, q) in distribution_pair()) {
        let kl = kl_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
        let differs = p.iter().zip(&q).any(|(a, b)| (a - b).abs() > 1e-6);
        if differs {
            prop_assert!(kl > 0.0);
        }
    }

    #[test]
    fn kl_is_cross_entropy_minus_entropy((p, q) in distribution_pair()) {
        let kl = kl_divergence(&p, &q).unwrap();
        let ce = cross_entropy(&p, &q).unwrap();
        prop_assert!((kl - (ce - entropy(&p))).abs() <= 1e-10);
    }

    #[test]
    fn normalized_entropy_in_unit_interval(p in distribution()) {
        let e = normalized_entropy(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn cvi_invariant_under_relabeling(
        (labels, axis, end, _k) in labelled_axis(),
        shift in 0usize..7,
    ) {
        let (labels, k) = compact(&labels);
        let relabelled: Vec<usize> = labels.iter().map(|l| (l - 1 + shift) % k + 1).collect();
        let a = Partition::from_labels(labels, k).unwrap();
        let b = Partition::from_labels(relabelled, k).unwrap();
        let sa = onset_cvi(&a, &axis, end, None);
        let sb = onset_cvi(&b, &axis, end, None);
        match (sa, sb) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x.value, y.value),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "one side failed: {:?}", other),
        }
    }

    #[test]
    fn cvi_invariant_under_affine_axis(
        (labels, axis, end, _k) in labelled_axis(),
        scale in 0.01f64..100.0,
        offset in -1000.0f64..1000.0,
    ) {
        let (labels, k) = compact(&labels);
        prop_assume!(k >= 2);
        let p = Partition::from_labels(labels, k).unwrap();
        let moved: Vec<f64> = axis.iter().map(|t| scale * t + offset).collect();
        let a = onset_cvi(&p, &axis, end, None).unwrap();
        let b = onset_cvi(&p, &moved, scale * end + offset, None).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-9, "{} vs {}", a.value, b.value);
        let prior = PriorOnsets::uniform(k).unwrap();
        let a = onset_cvi(&p, &axis, end, Some(&prior)).unwrap();
        let b = onset_cvi(&p, &moved, scale * end + offset, Some(&prior)).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-9);
    }

    #[test]
    fn from_onsets_ignores_input_order(
        mut onsets in prop::collection::vec((0usize..20, 0.0f64..10.0), 1..10),
    ) {
        let a = OnsetDistribution::from_onsets(onsets.clone(), 11.0).unwrap();
        onsets.reverse();
        let b = OnsetDistribution::from_onsets(onsets, 11.0).unwrap();
        prop_assert_eq!(a.deltas, b.deltas);
    }
}
