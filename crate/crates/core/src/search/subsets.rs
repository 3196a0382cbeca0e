use crate::dataset::FeatureSubset;
use crate::error::{Error, Result};

/// Lexicographic iterator over all `p`-element subsets of `0..d`.
#[derive(Debug, Clone)]
pub struct Subsets {
    d: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = FeatureSubset;

    fn next(&mut self) -> Option<FeatureSubset> {
        let current = self.current.as_mut()?;
        let out =
            FeatureSubset::new(current.clone()).expect("combinations are strictly increasing");
        let p = current.len();
        // Rightmost position that can still advance.
        match (0..p).rev().find(|&i| current[i] < self.d - p + i) {
            Some(i) => {
                current[i] += 1;
                for j in i + 1..p {
                    current[j] = current[j - 1] + 1;
                }
            }
            None => self.current = None,
        }
        Some(out)
    }
}

pub fn enumerate_subsets(d: usize, p: usize) -> Result<Subsets> {
    if p == 0 || p > d {
        return Err(Error::Argument(format!(
            "cannot choose {p} of {d} features"
        )));
    }
    Ok(Subsets {
        d,
        current: Some((0..p).collect()),
    })
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}
