use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Fraction of event pairs on which two labelings agree (both together or both apart).
pub fn rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash + Copy,
    B: Eq + Hash + Copy,
{
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "labelings have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u64;
    if n < 2 {
        return Err(Error::Argument(
            "rand index needs at least two events".into(),
        ));
    }
    let mut joint: HashMap<(A, B), u64> = HashMap::new();
    let mut left: HashMap<A, u64> = HashMap::new();
    let mut right: HashMap<B, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *left.entry(x).or_default() += 1;
        *right.entry(y).or_default() += 1;
    }
    let together_both: u64 = joint.values().map(|&c| pairs(c)).sum();
    let together_left: u64 = left.values().map(|&c| pairs(c)).sum();
    let together_right: u64 = right.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    // Pairs split in both = total - together_left - together_right + together_both.
    let agree = total + 2 * together_both - together_left - together_right;
    Ok(agree as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cases() {
        assert_eq!(rand_index(&[1, 2, 2, 3], &[1, 2, 2, 3]).unwrap(), 1.0);
        assert_eq!(rand_index(&[1usize, 1, 2], &[2i64, 2, 1]).unwrap(), 1.0);
        assert!((rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(rand_index(&[1], &[1]).is_err());
        assert!(rand_index(&[1, 2], &[1]).is_err());
    }
}
